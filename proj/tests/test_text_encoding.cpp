#include <doctest.h>

#include <string>
#include <vector>

#include "xmodal/errors.hpp"
#include "xmodal/text_encoding.hpp"

using namespace xmodal;

namespace {

WordEmbeddingTable table_of(std::vector<std::string> tokens, std::vector<double> vectors, int dim) {
  return WordEmbeddingTable(std::move(tokens), std::move(vectors), dim);
}

}  // namespace

TEST_CASE("embedding table parsing") {
  const auto t = parse_embedding_table("2 3\na 1 0 0\nb 0 1 0\n");
  CHECK(t.size() == 2);
  CHECK(t.dim() == 3);
  REQUIRE(t.find("b"));
  CHECK(t.row(*t.find("b"))[1] == 1.0);
  CHECK_FALSE(t.find("c"));

  CHECK_THROWS_AS(parse_embedding_table("2 3\na 1 0 0\nb 0 1\n"), DataError);
  CHECK_THROWS_AS(parse_embedding_table("1 3\na 1 0 0\na 0 1 0\n"), DataError);
  CHECK_THROWS_AS(parse_embedding_table("2 3\na 1 0 0\n"), DataError);
  CHECK_THROWS_AS(parse_embedding_table("1 2\na nan 0\n"), DataError);
  CHECK_THROWS_AS(parse_embedding_table("1 2\na x 0\n"), DataError);
  CHECK_THROWS_AS(parse_embedding_table(""), DataError);

  try {
    parse_embedding_table("2 3\na 1 0 0\nb 0 1\n");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("embedding table round-trips through text") {
  const auto t = table_of({"x", "yy"}, {0.1, -0.25, 1.0 / 3.0, 7.0}, 2);
  const auto back = parse_embedding_table(format_embedding_table(t));
  REQUIRE(back.size() == 2);
  CHECK(back.tokens() == t.tokens());
  for (std::size_t i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) CHECK(back.row(i)[k] == t.row(i)[k]);
  }
}

TEST_CASE("tokenize") {
  CHECK(tokenize("A man on a speed motorcycle") ==
        std::vector<std::string>{"a", "man", "on", "a", "speed", "motorcycle"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("beach-volleyball!") == std::vector<std::string>{"beach", "volleyball"});
  CHECK(tokenize("  2 dogs ") == std::vector<std::string>{"2", "dogs"});
}

TEST_CASE("quantize") {
  EncodingSpec spec;
  CHECK(quantize_component(-1.0, spec) == 0);
  CHECK(quantize_component(1.0, spec) == 255);
  CHECK(quantize_component(0.0, spec) == 128);
  CHECK(quantize_component(-7.0, spec) == 0);
  CHECK(quantize_component(7.0, spec) == 255);
  spec.value_min = 0.0;
  spec.value_max = 2.0;
  CHECK(quantize_component(1.0, spec) == 128);
}

TEST_CASE("word blocks") {
  const EncodingSpec spec;
  CHECK(word_block_side(3) == 1);
  CHECK(word_block_side(6) == 2);
  CHECK(word_block_side(128) == 7);

  const std::vector<double> six{-1, -1, -1, 1, 1, 1};
  const auto b6 = encode_word(six, spec);
  CHECK(b6.side == 2);
  CHECK(b6.filled == 2);
  CHECK(b6.rgb == std::vector<std::uint8_t>{0, 0, 0, 255, 255, 255, 0, 0, 0, 0, 0, 0});

  const std::vector<double> v128(128, 1.0);
  const auto b = encode_word(v128, spec);
  CHECK(b.filled == 43);
  CHECK(b.side == 7);
  int black = 0;
  for (int p = 0; p < 49; ++p) {
    black += b.rgb[p * 3] == 0 && b.rgb[p * 3 + 1] == 0 && b.rgb[p * 3 + 2] == 0;
  }
  CHECK(black == 6);
  // 128 = 42 * 3 + 2: the last filled cell carries one padding component.
  CHECK(b.rgb[42 * 3 + 1] == 255);
  CHECK(b.rgb[42 * 3 + 2] == 128);
}

TEST_CASE("encode_text") {
  EncodingSpec spec;
  spec.canvas_width = 8;
  spec.canvas_height = 8;
  const auto table = table_of({"w", "v"}, {-1, 0, 1, 1, 1, 1}, 3);

  SUBCASE("no tokens gives a black canvas") {
    const auto r = encode_text({}, table, spec);
    CHECK(r.image == RgbImage(8, 8));
    CHECK(r.words_drawn == 0);
  }

  SUBCASE("single word at the origin") {
    const std::vector<std::string> toks{"w"};
    const auto r = encode_text(toks, table, spec);
    const auto* px = r.image.pixel(0, 0);
    CHECK(px[0] == 0);
    CHECK(px[1] == 128);
    CHECK(px[2] == 255);
    CHECK(r.image.pixel(1, 0)[0] == 0);
    CHECK(encode_text(toks, table, spec).image == r.image);
  }

  SUBCASE("gap, wrap and truncation") {
    spec.canvas_width = 4;
    spec.canvas_height = 3;
    const std::vector<std::string> toks{"v", "v", "v", "v", "v"};
    const auto r = encode_text(toks, table, spec);
    // pitch 2: cells (0,0) (2,0) (0,2) (2,2), then out of rows
    CHECK(r.words_drawn == 4);
    CHECK(r.truncated == 1);
    CHECK(r.image.pixel(2, 2)[0] == 255);
    CHECK(r.image.pixel(1, 0)[0] == 0);
    CHECK(r.image.pixel(0, 1)[0] == 0);
  }

  SUBCASE("superpixel scale replicates cells") {
    spec.superpixel_scale = 2;
    const std::vector<std::string> toks{"v", "v"};
    const auto r = encode_text(toks, table, spec);
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) CHECK(r.image.pixel(x, y)[0] == 255);
    }
    CHECK(r.image.pixel(2, 0)[0] == 0);
    CHECK(r.image.pixel(4, 0)[0] == 255);
  }

  SUBCASE("OOV policies") {
    const std::vector<std::string> toks{"zebra", "w"};
    const auto skipped = encode_text(toks, table, spec);
    CHECK(skipped.oov_skipped == 1);
    CHECK(skipped.words_drawn == 1);
    CHECK(skipped.image.pixel(0, 0)[2] == 255);

    spec.oov_policy = OovPolicy::hashed_fallback;
    const auto hashed = encode_text(toks, table, spec);
    CHECK(hashed.words_drawn == 2);
    CHECK(hashed.oov_skipped == 0);
    CHECK(hashed.image.pixel(2, 0)[2] == 255);
    CHECK(hashed_fallback_vector("zebra", 3, spec) == hashed_fallback_vector("zebra", 3, spec));
    CHECK(hashed_fallback_vector("zebra", 3, spec) != hashed_fallback_vector("zebrb", 3, spec));
    for (double v : hashed_fallback_vector("zebra", 50, spec)) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }

  SUBCASE("invalid specs") {
    const std::vector<std::string> toks{"w"};
    spec.superpixel_scale = 3;
    CHECK_THROWS_AS(encode_text(toks, table, spec), DataError);
    spec.superpixel_scale = 1;
    spec.value_min = 1.0;
    CHECK_THROWS_AS(encode_text(toks, table, spec), DataError);
  }
}

TEST_CASE("crop_encoded") {
  RgbImage img(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      img.set(x, y, static_cast<std::uint8_t>(y * 4 + x), 0, 0);
    }
  }
  CHECK(crop_encoded(img, 4, 4, 0, 0) == img);
  const auto one = crop_encoded(img, 1, 1, 3, 2);
  CHECK(one.width == 1);
  CHECK(one.pixel(0, 0)[0] == 11);
  const auto two = crop_encoded(img, 2, 2, 1, 1);
  CHECK(two.pixel(0, 0)[0] == 5);
  CHECK(two.pixel(1, 0)[0] == 6);
  CHECK(two.pixel(0, 1)[0] == 9);
  CHECK(two.pixel(1, 1)[0] == 10);
  CHECK_THROWS_AS(crop_encoded(img, 2, 2, 3, 0), DataError);
}
