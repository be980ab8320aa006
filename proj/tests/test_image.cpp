#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "xmodal/errors.hpp"
#include "xmodal/image.hpp"
#include "xmodal/rng.hpp"

using namespace xmodal;
namespace fs = std::filesystem;

namespace {

RgbImage random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(w, h);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

fs::path scratch(const char* name) {
  const auto dir = fs::temp_directory_path() / "xmodal_test_image";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("PPM round-trip") {
  const auto img = random_image(5, 3, 1);
  const auto bytes = encode_ppm(img);
  CHECK(bytes.rfind("P6\n5 3\n255\n", 0) == 0);
  CHECK(decode_ppm(bytes) == img);

  const auto path = scratch("a.ppm");
  write_ppm(path, img);
  CHECK(read_image(path) == img);

  CHECK(decode_ppm("P6\n# comment\n5 3\n255\n" + bytes.substr(11)) == img);
  CHECK_THROWS_AS(decode_ppm("P3\n1 1\n255\n"), DataError);
  CHECK_THROWS_AS(decode_ppm("P6\n2 2\n255\nabc"), DataError);
  CHECK_THROWS_AS(decode_ppm("P6\n1 1\n65535\n"), DataError);
  CHECK_THROWS_AS(read_ppm(scratch("missing.ppm")), DataError);
}

TEST_CASE("PNG round-trip") {
  const auto img = random_image(7, 4, 2);
  const auto path = scratch("a.png");
  write_png(path, img);
  CHECK(read_image(path) == img);
}

TEST_CASE("crop") {
  const auto img = random_image(6, 5, 3);
  CHECK(crop(img, 0, 0, 6, 5) == img);
  const auto c = crop(img, 2, 1, 3, 2);
  CHECK(c.width == 3);
  CHECK(c.height == 2);
  CHECK(std::equal(c.pixel(0, 1), c.pixel(0, 1) + 9, img.pixel(2, 2)));
  CHECK_THROWS_AS(crop(img, -1, 0, 2, 2), DataError);
  CHECK_THROWS_AS(crop(img, 5, 0, 2, 2), DataError);
  CHECK_THROWS_AS(crop(img, 0, 0, 0, 2), DataError);
}

TEST_CASE("hflip") {
  const auto img = random_image(5, 4, 4);
  CHECK(hflip(hflip(img)) == img);

  RgbImage sym(3, 1);
  sym.set(0, 0, 9, 9, 9);
  sym.set(2, 0, 9, 9, 9);
  CHECK(hflip(sym) == sym);

  RgbImage ab(2, 1);
  ab.set(0, 0, 1, 2, 3);
  ab.set(1, 0, 4, 5, 6);
  const auto ba = hflip(ab);
  CHECK(ba.pixel(0, 0)[0] == 4);
  CHECK(ba.pixel(1, 0)[2] == 3);
}

TEST_CASE("resize_bilinear") {
  const auto img = random_image(9, 6, 5);

  SUBCASE("same size is identity") {
    const auto sq = random_image(8, 8, 6);
    CHECK(resize_bilinear(sq, 8) == sq);
  }

  SUBCASE("constant stays constant") {
    RgbImage c(7, 3);
    std::fill(c.data.begin(), c.data.end(), 77);
    const auto r = resize_bilinear(c, 12);
    CHECK(std::all_of(r.data.begin(), r.data.end(), [](std::uint8_t v) { return v == 77; }));
  }

  SUBCASE("corners preserved, no overshoot") {
    for (int side : {2, 5, 16, 31}) {
      const auto r = resize_bilinear(img, side);
      CHECK(std::equal(r.pixel(0, 0), r.pixel(0, 0) + 3, img.pixel(0, 0)));
      CHECK(std::equal(r.pixel(side - 1, 0), r.pixel(side - 1, 0) + 3, img.pixel(8, 0)));
      CHECK(std::equal(r.pixel(0, side - 1), r.pixel(0, side - 1) + 3, img.pixel(0, 5)));
      CHECK(std::equal(r.pixel(side - 1, side - 1), r.pixel(side - 1, side - 1) + 3, img.pixel(8, 5)));
      for (int c = 0; c < 3; ++c) {
        std::uint8_t lo = 255, hi = 0;
        for (std::size_t i = c; i < img.data.size(); i += 3) {
          lo = std::min(lo, img.data[i]);
          hi = std::max(hi, img.data[i]);
        }
        for (std::size_t i = c; i < r.data.size(); i += 3) {
          CHECK(r.data[i] >= lo);
          CHECK(r.data[i] <= hi);
        }
      }
    }
  }

  SUBCASE("midpoint of a two-pixel ramp") {
    RgbImage ramp(2, 2);
    ramp.set(1, 0, 100, 100, 100);
    ramp.set(1, 1, 100, 100, 100);
    CHECK(resize_bilinear(ramp, 3).pixel(1, 0)[0] == 50);
  }

  CHECK_THROWS_AS(resize_bilinear(img, 0), DataError);
}
