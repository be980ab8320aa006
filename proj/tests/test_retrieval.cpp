#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "retrieval_oracle.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/retrieval.hpp"

using namespace xmodal;
using namespace xmodal::testing;

namespace {

EmbeddingIndex line_index(std::size_t n) {
  Matrix m(n, 1);
  std::vector<int> groups;
  for (std::size_t i = 0; i < n; ++i) {
    m(i, 0) = static_cast<double>(i);
    groups.push_back(static_cast<int>(i));
  }
  return make_index(m, "t", Modality::text, groups);
}

std::vector<std::size_t> rows_of(const RankedList& list) {
  std::vector<std::size_t> out;
  for (const auto& n : list) out.push_back(n.row);
  return out;
}

}  // namespace

TEST_CASE("euclidean distance") {
  const std::vector<double> a{0, 0}, b{3, 4};
  CHECK(euclidean_distance(a, a) == 0.0);
  CHECK(euclidean_distance(a, b) == 5.0);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(16), y(16);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    double xx = 0, yy = 0, xy = 0;
    for (int k = 0; k < 16; ++k) {
      xx += x[k] * x[k];
      yy += y[k] * y[k];
      xy += x[k] * y[k];
    }
    CHECK(euclidean_distance(x, y) == doctest::Approx(std::sqrt(xx + yy - 2 * xy)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(euclidean_distance(a, std::vector<double>{1, 2, 3}), DataError);
}

TEST_CASE("knn basics") {
  Rng rng(2);
  const auto idx = make_index(gaussian_matrix(30, 8, rng), "x", Modality::image, std::vector<int>(30, 0));

  SUBCASE("self query returns the row") {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      CHECK(knn_naive(idx, idx.row(i), 1)[0].row == i);
      CHECK(knn_fast(idx, idx.row(i), 1)[0].row == i);
    }
  }

  SUBCASE("k = N is a full sort, naive equals sort-then-truncate") {
    const auto q = gaussian_matrix(1, 8, rng);
    const auto full = knn_naive(idx, q.row(0), 30);
    REQUIRE(full.size() == 30);
    for (std::size_t i = 1; i < full.size(); ++i) CHECK(full[i - 1].distance <= full[i].distance);
    const auto order = rows_of(full);
    for (std::size_t k : {1, 5, 17}) {
      const auto part = knn_naive(idx, q.row(0), k);
      CHECK(rows_of(part) == std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)));
    }
    CHECK(knn_naive(idx, q.row(0), 1000).size() == 30);
  }

  SUBCASE("exclusion and errors") {
    const auto r = knn_fast(idx, idx.row(4), 3, std::nullopt, 4);
    CHECK(std::none_of(r.begin(), r.end(), [](const Neighbor& n) { return n.row == 4; }));
    CHECK_THROWS_AS(knn_naive(idx, idx.row(0), 1, Modality::text), DataError);
    CHECK_THROWS_AS(knn_fast(idx, std::vector<double>(3), 1), DataError);
    CHECK_THROWS_AS(knn_fast(idx, idx.row(0), 0), DataError);
  }
}

TEST_CASE("orthogonal unit rows tie and come back in id order") {
  Matrix eye(6, 6);
  for (std::size_t i = 0; i < 6; ++i) eye(i, i) = 1.0;
  std::vector<std::string> ids{"f", "b", "e", "a", "d", "c"};
  const EmbeddingIndex idx(eye, ids, std::vector<Modality>(6, Modality::text), std::vector<int>(6, 0));
  const std::vector<double> zero(6, 0.0);
  const std::vector<std::string> sorted{"a", "b", "c", "d", "e", "f"};
  for (const auto& r : {knn_naive(idx, zero, 6), knn_fast(idx, zero, 6), knn_fast(idx, zero, 3)}) {
    std::vector<std::string> got;
    for (const auto& n : r) got.push_back(idx.id(n.row));
    CHECK(got == std::vector<std::string>(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(got.size())));
  }
}

TEST_CASE("knn_fast agrees with knn_naive on clustered and duplicated data") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + rng.index(200);
    const std::size_t d = trial % 2 ? 32 : 4;
    Matrix m = gaussian_matrix(n, d, rng);
    // duplicated rows, large common offset
    for (std::size_t i = 0; i < n; i += 7) {
      std::copy_n(m.row(0).begin(), d, m.row(i).begin());
    }
    for (auto& v : m.values) v = 1000.0 + v * 1e-3;
    const auto idx = make_index(m, "r", Modality::text, std::vector<int>(n, 0));
    const auto q = idx.row(0);
    for (std::size_t k : {1, 3, 10}) CHECK(knn_fast(idx, q, k) == knn_naive(idx, q, k));
  }
}

TEST_CASE("recall_at_k") {
  SUBCASE("hand-built four queries") {
    const auto idx = line_index(10);
    std::vector<RetrievalQuery> qs{
        {{-0.1}, 4, "q0"}, {{-0.1}, 5, "q1"}, {{-0.1}, 0, "q2"}, {{10.0}, 9, "q3"}};
    CHECK(recall_at_k(qs, idx, 5) == 75.0);
    CHECK(brute_force_recall(qs, idx, 5) == 75.0);
    CHECK(recall_at_k(qs, idx, 1) == 50.0);
  }

  SUBCASE("perfect embeddings") {
    const auto idx = line_index(10);
    std::vector<RetrievalQuery> qs;
    for (int i = 0; i < 10; ++i) qs.push_back({{i + 0.01}, i, ""});
    CHECK(recall_at_k(qs, idx, 1) == 100.0);
  }

  SUBCASE("self id is excluded") {
    const auto idx = line_index(3);
    std::vector<RetrievalQuery> qs{{{0.0}, 0, "t00000"}};
    CHECK(recall_at_k(qs, idx, 2) == 0.0);
  }

  SUBCASE("random embeddings sit at chance") {
    double sum = 0.0;
    const int seeds = 30;
    for (int s = 0; s < seeds; ++s) sum += random_sentence_to_image_recall(100, 16, 10, 1000 + s);
    CHECK(std::abs(sum / seeds - 10.0) <= 3.0);
  }

  SUBCASE("matches brute-force enumeration") {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 20 + rng.index(40);
      std::vector<int> groups(n);
      for (auto& g : groups) g = static_cast<int>(rng.index(8));
      const auto idx = make_index(gaussian_matrix(n, 4, rng), "c", Modality::text, groups);
      std::vector<RetrievalQuery> qs;
      for (std::size_t i = 0; i < 15; ++i) {
        const std::size_t src = rng.index(n);
        std::vector<double> v(idx.row(src).begin(), idx.row(src).end());
        qs.push_back({v, static_cast<int>(rng.index(8)), i % 2 ? idx.id(src) : ""});
      }
      for (std::size_t k : {1, 3, 7}) CHECK(recall_at_k(qs, idx, k) == brute_force_recall(qs, idx, k));
    }
  }
}

TEST_CASE("evaluate_bidirectional") {
  Matrix img(4, 4), txt(20, 4);
  std::vector<int> ig, tg;
  for (std::size_t i = 0; i < 4; ++i) {
    img(i, i) = 1.0;
    ig.push_back(static_cast<int>(i));
    for (std::size_t c = 0; c < 5; ++c) {
      txt(i * 5 + c, i) = 1.0;
      tg.push_back(static_cast<int>(i));
    }
  }
  const auto images = make_index(img, "i", Modality::image, ig);
  const auto texts = make_index(txt, "s", Modality::text, tg);
  const std::vector<std::size_t> ks{1, 5, 10};
  const auto [i2s, s2i] = evaluate_bidirectional(images, texts, ks);
  CHECK(i2s.direction == Direction::image_to_sentence);
  CHECK(i2s.values == std::vector<double>{100, 100, 100});
  CHECK(s2i.values == std::vector<double>{100, 100, 100});

  const auto csv = format_recall_csv(std::vector<RecallTable>{i2s, s2i});
  CHECK(csv.rfind("direction,K,recall\nimage_to_sentence,1,100\n", 0) == 0);

  std::vector<int> orphan = ig;
  orphan[3] = 99;
  CHECK_THROWS_AS(evaluate_bidirectional(make_index(img, "i", Modality::image, orphan), texts, ks), DataError);
}

TEST_CASE("embedding file round-trip") {
  Rng rng(4);
  Matrix m = gaussian_matrix(3, 5, rng);
  m(0, 0) = 1.0 / 3.0;
  const EmbeddingIndex idx(m, {"a.jpg", "a.jpg#0", "a.jpg#1"},
                           {Modality::image, Modality::text, Modality::text}, {7, 7, 7});
  const auto text = format_embedding_file(idx);
  const auto back = parse_embedding_file(text);
  CHECK(back.items() == idx.items());
  CHECK(back.id(1) == "a.jpg#0");
  CHECK(back.modality(0) == Modality::image);
  CHECK(back.group(2) == 7);
  CHECK(format_embedding_file(back) == text);
  CHECK(idx.select(Modality::text).size() == 2);

  const auto path = std::filesystem::temp_directory_path() / "xmodal_test_emb.txt";
  write_embedding_file(path, idx);
  CHECK(read_embedding_file(path).items() == idx.items());

  CHECK_THROWS_AS(parse_embedding_file("2 2\na image 0 1 2\n"), DataError);
  CHECK_THROWS_AS(parse_embedding_file("1 2\na sound 0 1 2\n"), DataError);
  CHECK_THROWS_AS(parse_embedding_file("2 1\na image 0 1\na text 0 2\n"), DataError);
}
