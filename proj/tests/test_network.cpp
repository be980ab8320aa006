#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/network.hpp"

using namespace xmodal;
using xmodal::testing::LossProbe;

namespace {

Matrix ones(std::size_t r, std::size_t c) {
  Matrix m(r, c);
  std::fill(m.values.begin(), m.values.end(), 1.0);
  return m;
}

}  // namespace

TEST_CASE("conv spec strings round-trip") {
  const auto specs = parse_conv_specs("8p,16p,4");
  REQUIRE(specs.size() == 3);
  CHECK(specs[0] == ConvSpec{8, true});
  CHECK(specs[2] == ConvSpec{4, false});
  CHECK(format_conv_specs(specs) == "8p,16p,4");
  CHECK_THROWS_AS(parse_conv_specs("8q"), UsageError);
  CHECK_THROWS_AS(parse_conv_specs(""), UsageError);
}

TEST_CASE("config validation") {
  NetworkConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.input_side = 8;
  cfg.conv_specs = {{2, true}, {2, true}, {2, true}, {2, true}};
  CHECK_THROWS_AS(cfg.validate(), DataError);  // 8 -> 4 -> 2 -> 1 -> 0
  cfg = NetworkConfig{};
  cfg.embedding_dim = 1;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = NetworkConfig{};
  cfg.num_classes = 1;
  CHECK_THROWS_AS(cfg.validate(), DataError);
  cfg = NetworkConfig{};
  cfg.lambda_center = -0.1;
  CHECK_THROWS_AS(cfg.validate(), DataError);
}

TEST_CASE("init_network is seeded and He-scaled") {
  NetworkConfig cfg = xmodal::testing::tiny_config(7);
  const auto a = init_network(cfg);
  const auto b = init_network(cfg);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    CHECK(a.parameters()[i].values == b.parameters()[i].values);
  }
  for (const auto& t : a.parameters()) {
    if (t.shape.size() == 1) {
      CHECK(std::all_of(t.values.begin(), t.values.end(), [](double v) { return v == 0.0; }));
    }
  }
  cfg.seed = 8;
  CHECK(init_network(cfg).parameter("conv0.weight").values != a.parameter("conv0.weight").values);

  // fan_in = 3 * 3 * 3 = 27; 400 output channels give 10800 samples.
  NetworkConfig wide = cfg;
  wide.conv_specs = {{400, false}};
  const auto& w = init_network(wide).parameter("conv0.weight").values;
  REQUIRE(w.size() >= 10000);
  double sum = 0.0, sq = 0.0;
  for (double v : w) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(w.size());
  const double stddev = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(stddev == doctest::Approx(std::sqrt(2.0 / 27.0)).epsilon(0.05));
}

TEST_CASE("forward basics") {
  const NetworkConfig cfg = xmodal::testing::tiny_config(3);
  auto net = init_network(cfg);
  Rng rng(11);

  SUBCASE("zero input and zero head give zero embedding") {
    for (auto& v : net.parameter("embed.weight").values) v = 0.0;
    Batch b = xmodal::testing::random_batch(cfg, 2, rng);
    std::fill(b.inputs.values.begin(), b.inputs.values.end(), 0.0);
    const auto fw = forward(net, b);
    for (double v : fw.embeddings.values) CHECK(v == 0.0);
  }

  SUBCASE("duplicated rows embed identically, repeated calls are identical") {
    Batch b = xmodal::testing::random_batch(cfg, 3, rng);
    const std::size_t sample = 3 * 8 * 8;
    std::copy_n(b.inputs.values.begin(), sample, b.inputs.values.begin() + 2 * sample);
    const auto fw = forward(net, b);
    for (std::size_t k = 0; k < fw.embeddings.cols; ++k) CHECK(fw.embeddings(0, k) == fw.embeddings(2, k));
    const auto again = forward(net, b);
    CHECK(again.embeddings == fw.embeddings);
    CHECK(again.logits == fw.logits);
  }

  SUBCASE("shape mismatch is rejected") {
    NetworkConfig other = cfg;
    other.input_side = 16;
    Batch b = xmodal::testing::random_batch(other, 1, rng);
    CHECK_THROWS_AS(forward(net, b), DataError);
  }
}

TEST_CASE("normalized embeddings have unit norm") {
  NetworkConfig cfg = xmodal::testing::tiny_config(5);
  cfg.normalize_embeddings = true;
  cfg.embedding_dim = 6;
  const auto net = init_network(cfg);
  Rng rng(2);
  const auto fw = forward(net, xmodal::testing::random_batch(cfg, 5, rng));
  for (std::size_t i = 0; i < fw.embeddings.rows; ++i) {
    double sq = 0.0;
    for (double v : fw.embeddings.row(i)) sq += v * v;
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("one parameter store serves both modalities") {
  const NetworkConfig cfg = xmodal::testing::tiny_config(9);
  auto net = init_network(cfg);
  Rng rng(4);
  Batch b = xmodal::testing::random_batch(cfg, 2, rng);
  REQUIRE(b.modality[0] == Modality::image);
  REQUIRE(b.modality[1] == Modality::text);

  // Same pixels tagged as either modality embed identically.
  Batch swapped = b;
  std::swap(swapped.modality[0], swapped.modality[1]);
  CHECK(forward(net, swapped).embeddings == forward(net, b).embeddings);

  const auto before = forward(net, b).embeddings;
  for (auto& v : net.parameter("conv0.weight").values) v *= 1.5;
  const auto after = forward(net, b).embeddings;
  for (std::size_t i = 0; i < 2; ++i) {
    bool changed = false;
    for (std::size_t k = 0; k < after.cols; ++k) changed |= after(i, k) != before(i, k);
    CHECK(changed);
  }
  std::size_t weight_tensors = 0;
  for (const auto& t : net.parameters()) weight_tensors += t.name.find("weight") != std::string::npos;
  CHECK(weight_tensors == 3);  // conv0, embed, classifier: no per-modality copies
}

TEST_CASE("backward linearity") {
  const NetworkConfig cfg = xmodal::testing::tiny_config(12);
  const auto net = init_network(cfg);
  Rng rng(6);
  const Batch b = xmodal::testing::random_batch(cfg, 3, rng);
  const auto fw = forward(net, b);

  const auto zero = backward(net, fw.cache, Matrix(3, 4), Matrix(3, 3));
  for (const auto& g : zero) {
    for (double v : g.values) CHECK(v == 0.0);
  }

  Matrix de = ones(3, 4), dl = ones(3, 3);
  const auto g1 = backward(net, fw.cache, de, dl);
  for (auto& v : de.values) v *= 2.0;
  for (auto& v : dl.values) v *= 2.0;
  const auto g2 = backward(net, fw.cache, de, dl);
  for (std::size_t p = 0; p < g1.size(); ++p) {
    for (std::size_t i = 0; i < g1[p].size(); ++i) {
      CHECK(g2[p].values[i] == doctest::Approx(2.0 * g1[p].values[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward rejects a foreign cache") {
  const auto net = init_network(xmodal::testing::tiny_config(1));
  NetworkConfig bigger = xmodal::testing::tiny_config(1);
  bigger.conv_specs = {{4, true}, {4, false}};
  const auto other = init_network(bigger);
  Rng rng(3);
  const auto fw = forward(other, xmodal::testing::random_batch(bigger, 1, rng));
  CHECK_THROWS_AS(backward(net, fw.cache, Matrix(1, 4), Matrix(1, 3)), DataError);
}

TEST_CASE("parameter gradients match central finite differences") {
  auto check = [](NetworkConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    auto net = init_network(cfg);
    Rng rng(seed * 31 + 1);
    for (auto& t : net.parameters()) {
      if (t.shape.size() == 1) {
        for (auto& v : t.values) v = rng.uniform(-0.1, 0.1);
      }
    }
    const Batch b = xmodal::testing::random_batch(cfg, 3, rng);
    LossProbe probe{xmodal::testing::random_centers(cfg, rng), cfg.lambda_center};
    const auto fw = forward(net, b);
    const auto loss = total_loss(fw.logits, fw.embeddings, b.labels, probe.centers, probe.lambda);
    const auto grads = backward(net, fw.cache, loss.d_embeddings, loss.d_logits);
    return xmodal::testing::max_parameter_gradient_error(net, b, probe, grads);
  };

  SUBCASE("tiny net") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      CHECK(check(xmodal::testing::tiny_config(0), seed) < 1e-4);
    }
  }
  SUBCASE("two conv layers, one unpooled, normalized embeddings") {
    NetworkConfig cfg = xmodal::testing::tiny_config(0);
    cfg.conv_specs = {{3, false}, {4, true}};
    cfg.normalize_embeddings = true;
    cfg.lambda_center = 0.7;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) CHECK(check(cfg, seed) < 1e-4);
  }
  SUBCASE("odd spatial extent under pooling") {
    NetworkConfig cfg = xmodal::testing::tiny_config(0);
    cfg.input_side = 9;
    cfg.conv_specs = {{2, true}, {3, true}};
    CHECK(check(cfg, 4) < 1e-4);
  }
}
