#include "xmodal/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

namespace xmodal {

std::string_view to_string(Modality m) { return m == Modality::image ? "image" : "text"; }

Modality parse_modality(std::string_view name) {
  if (name == "image") return Modality::image;
  if (name == "text") return Modality::text;
  throw DataError("unknown modality '" + std::string(name) + "'");
}

std::vector<ConvSpec> parse_conv_specs(std::string_view text) {
  std::vector<ConvSpec> specs;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(pos, end - pos);
    pos = end + 1;
    ConvSpec spec;
    spec.pool = !item.empty() && item.back() == 'p';
    if (spec.pool) item.remove_suffix(1);
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), spec.out_channels);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size() ||
        spec.out_channels < 1) {
      throw UsageError("bad conv spec '" + std::string(text) + "' (expected e.g. 8p,16p)");
    }
    specs.push_back(spec);
  }
  return specs;
}

std::string format_conv_specs(std::span<const ConvSpec> specs) {
  std::string out;
  for (const auto& s : specs) {
    if (!out.empty()) out += ',';
    out += std::to_string(s.out_channels);
    if (s.pool) out += 'p';
  }
  return out;
}

void NetworkConfig::validate() const {
  if (input_side < 8) throw DataError("input_side must be >= 8");
  if (embedding_dim < 2) throw DataError("embedding_dim must be >= 2");
  if (num_classes < 2) throw DataError("num_classes must be >= 2");
  if (!(lambda_center >= 0.0) || !std::isfinite(lambda_center)) {
    throw DataError("lambda_center must be a finite value >= 0");
  }
  if (conv_specs.empty()) throw DataError("at least one conv layer is required");
  int side = input_side;
  for (const auto& s : conv_specs) {
    if (s.out_channels < 1) throw DataError("conv layers need >= 1 output channel");
    if (s.pool) side /= 2;
    if (side < 1) throw DataError("pooling reduces the spatial extent below 1");
  }
}

EmbeddingNet::EmbeddingNet(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t in_ch = 3;
  for (std::size_t i = 0; i < config_.conv_specs.size(); ++i) {
    const auto out_ch = static_cast<std::size_t>(config_.conv_specs[i].out_channels);
    const std::string prefix = "conv" + std::to_string(i);
    params_.emplace_back(prefix + ".weight", std::vector<std::size_t>{out_ch, in_ch, 3, 3});
    params_.emplace_back(prefix + ".bias", std::vector<std::size_t>{out_ch});
    in_ch = out_ch;
  }
  const auto d = static_cast<std::size_t>(config_.embedding_dim);
  const auto c = static_cast<std::size_t>(config_.num_classes);
  params_.emplace_back("embed.weight", std::vector<std::size_t>{d, in_ch});
  params_.emplace_back("embed.bias", std::vector<std::size_t>{d});
  params_.emplace_back("classifier.weight", std::vector<std::size_t>{c, d});
  params_.emplace_back("classifier.bias", std::vector<std::size_t>{c});
}

Tensor& EmbeddingNet::parameter(std::string_view name) {
  for (auto& t : params_) {
    if (t.name == name) return t;
  }
  throw DataError("no parameter named '" + std::string(name) + "'");
}

const Tensor& EmbeddingNet::parameter(std::string_view name) const {
  return const_cast<EmbeddingNet*>(this)->parameter(name);
}

int EmbeddingNet::feature_dim() const { return config_.conv_specs.back().out_channels; }

std::vector<Tensor> EmbeddingNet::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.name, p.shape);
  return out;
}

EmbeddingNet init_network(const NetworkConfig& config) {
  EmbeddingNet net(config);
  Rng rng(derive_seed(config.seed, "init"));
  for (auto& t : net.parameters()) {
    if (t.shape.size() < 2) continue;  // biases stay zero
    const std::size_t fan_in = t.size() / t.shape[0];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.values) v = stddev * rng.normal();
  }
  return net;
}

namespace {

// 3x3 convolution, stride 1, zero padding 1.
void conv3x3_forward(const double* in, int in_ch, int h, int w, const double* weight,
                     const double* bias, int out_ch, double* out) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int oc = 0; oc < out_ch; ++oc) {
    double* o = out + oc * plane;
    std::fill(o, o + plane, bias[oc]);
    for (int ic = 0; ic < in_ch; ++ic) {
      const double* src = in + ic * plane;
      const double* k = weight + (static_cast<std::size_t>(oc) * in_ch + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int y0 = std::max(0, 1 - ky);
        const int y1 = std::min(h, h + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = k[ky * 3 + kx];
          const int x0 = std::max(0, 1 - kx);
          const int x1 = std::min(w, w + 1 - kx);
          for (int y = y0; y < y1; ++y) {
            double* orow = o + static_cast<std::size_t>(y) * w;
            const double* srow = src + static_cast<std::size_t>(y + ky - 1) * w + (kx - 1);
            for (int x = x0; x < x1; ++x) orow[x] += wv * srow[x];
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients; writes d_in when non-null.
void conv3x3_backward(const double* in, int in_ch, int h, int w, const double* weight, int out_ch,
                      const double* d_out, double* d_weight, double* d_bias, double* d_in) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  if (d_in != nullptr) std::fill(d_in, d_in + plane * in_ch, 0.0);
  for (int oc = 0; oc < out_ch; ++oc) {
    const double* g = d_out + oc * plane;
    double bsum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) bsum += g[i];
    d_bias[oc] += bsum;
    for (int ic = 0; ic < in_ch; ++ic) {
      const double* src = in + ic * plane;
      double* dsrc = d_in != nullptr ? d_in + ic * plane : nullptr;
      const std::size_t kbase = (static_cast<std::size_t>(oc) * in_ch + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int y0 = std::max(0, 1 - ky);
        const int y1 = std::min(h, h + 1 - ky);
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = weight[kbase + ky * 3 + kx];
          const int x0 = std::max(0, 1 - kx);
          const int x1 = std::min(w, w + 1 - kx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * w;
            const std::size_t soff = static_cast<std::size_t>(y + ky - 1) * w + (kx - 1);
            const double* srow = src + soff;
            for (int x = x0; x < x1; ++x) acc += grow[x] * srow[x];
            if (dsrc != nullptr) {
              double* drow = dsrc + soff;
              for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
            }
          }
          d_weight[kbase + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

// 2x2 max pool, stride 2; ties go to the first element in scan order.
void maxpool_forward(const double* in, int ch, int h, int w, double* out, std::uint32_t* argmax) {
  const int oh = h / 2;
  const int ow = w / 2;
  for (int c = 0; c < ch; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * w + 2 * x;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + static_cast<std::size_t>(2 * y + dy) * w + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * oh + y) * ow + x;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

struct LayerGeometry {
  int in_ch, out_ch, side, out_side;
};

std::vector<LayerGeometry> geometry(const NetworkConfig& config) {
  std::vector<LayerGeometry> g;
  int ch = 3;
  int side = config.input_side;
  for (const auto& s : config.conv_specs) {
    const int out_side = s.pool ? side / 2 : side;
    g.push_back({ch, s.out_channels, side, out_side});
    ch = s.out_channels;
    side = out_side;
  }
  return g;
}

}  // namespace

ForwardResult forward(const EmbeddingNet& net, const Batch& batch) {
  const auto& cfg = net.config();
  const std::size_t m = batch.size();
  const auto side = static_cast<std::size_t>(cfg.input_side);
  if (m == 0) throw DataError("empty batch");
  if (batch.inputs.shape != std::vector<std::size_t>{m, 3, side, side}) {
    throw DataError("batch input shape does not match the network input (m x 3 x " +
                    std::to_string(side) + " x " + std::to_string(side) + ")");
  }
  if (batch.modality.size() != m) throw DataError("modality tags do not match batch size");

  const auto layers = geometry(cfg);
  const auto params = net.parameters();
  const auto d = static_cast<std::size_t>(cfg.embedding_dim);
  const auto c = static_cast<std::size_t>(cfg.num_classes);
  const auto f = static_cast<std::size_t>(net.feature_dim());
  const std::size_t head = 2 * layers.size();
  const Tensor& we = params[head];
  const Tensor& be = params[head + 1];
  const Tensor& wc = params[head + 2];
  const Tensor& bc = params[head + 3];

  ForwardResult result;
  result.embeddings = Matrix(m, d);
  result.logits = Matrix(m, c);
  result.cache.parameter_count = params.size();
  result.cache.input_side = cfg.input_side;
  result.cache.samples.resize(m);

  const std::size_t in_size = 3 * side * side;
  for (std::size_t i = 0; i < m; ++i) {
    SampleCache& sc = result.cache.samples[i];
    std::vector<double> act(batch.inputs.values.begin() + static_cast<std::ptrdiff_t>(i * in_size),
                            batch.inputs.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * in_size));
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& g = layers[l];
      const std::size_t plane = static_cast<std::size_t>(g.side) * g.side;
      std::vector<double> z(plane * g.out_ch);
      conv3x3_forward(act.data(), g.in_ch, g.side, g.side, params[2 * l].values.data(),
                      params[2 * l + 1].values.data(), g.out_ch, z.data());
      std::vector<double> r(z.size());
      std::transform(z.begin(), z.end(), r.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
      std::vector<std::uint32_t> winners;
      if (cfg.conv_specs[l].pool) {
        const std::size_t out_plane = static_cast<std::size_t>(g.out_side) * g.out_side;
        std::vector<double> pooled(out_plane * g.out_ch);
        winners.resize(pooled.size());
        maxpool_forward(r.data(), g.out_ch, g.side, g.side, pooled.data(), winners.data());
        r = std::move(pooled);
      }
      sc.conv_inputs.push_back(std::move(act));
      sc.pre_relu.push_back(std::move(z));
      sc.argmax.push_back(std::move(winners));
      act = std::move(r);
    }

    const std::size_t last_plane = static_cast<std::size_t>(layers.back().out_side) * layers.back().out_side;
    sc.features.assign(f, 0.0);
    for (std::size_t ch = 0; ch < f; ++ch) {
      double s = 0.0;
      for (std::size_t p = 0; p < last_plane; ++p) s += act[ch * last_plane + p];
      sc.features[ch] = s / static_cast<double>(last_plane);
    }

    sc.raw_embedding.assign(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      double s = be.values[k];
      for (std::size_t j = 0; j < f; ++j) s += we.values[k * f + j] * sc.features[j];
      sc.raw_embedding[k] = s;
    }
    auto emb = result.embeddings.row(i);
    if (cfg.normalize_embeddings) {
      double sq = 0.0;
      for (double v : sc.raw_embedding) sq += v * v;
      sc.raw_norm = std::sqrt(sq);
      if (sc.raw_norm > 0.0) {
        for (std::size_t k = 0; k < d; ++k) emb[k] = sc.raw_embedding[k] / sc.raw_norm;
      }
    } else {
      std::copy(sc.raw_embedding.begin(), sc.raw_embedding.end(), emb.begin());
    }

    auto logit = result.logits.row(i);
    for (std::size_t k = 0; k < c; ++k) {
      double s = bc.values[k];
      for (std::size_t j = 0; j < d; ++j) s += wc.values[k * d + j] * emb[j];
      logit[k] = s;
    }
  }
  return result;
}

std::vector<Tensor> backward(const EmbeddingNet& net, const ForwardCache& cache,
                             const Matrix& d_embeddings, const Matrix& d_logits) {
  const auto& cfg = net.config();
  const auto params = net.parameters();
  const std::size_t m = cache.samples.size();
  const auto d = static_cast<std::size_t>(cfg.embedding_dim);
  const auto c = static_cast<std::size_t>(cfg.num_classes);
  const auto f = static_cast<std::size_t>(net.feature_dim());
  if (cache.parameter_count != params.size() || cache.input_side != cfg.input_side) {
    throw DataError("forward cache does not belong to this network");
  }
  if (d_embeddings.rows != m || d_embeddings.cols != d || d_logits.rows != m || d_logits.cols != c) {
    throw DataError("upstream gradient shape does not match the forward batch");
  }

  const auto layers = geometry(cfg);
  const std::size_t head = 2 * layers.size();
  const Tensor& we = params[head];
  const Tensor& wc = params[head + 2];
  std::vector<Tensor> grads = net.zeros_like();
  Tensor& g_we = grads[head];
  Tensor& g_be = grads[head + 1];
  Tensor& g_wc = grads[head + 2];
  Tensor& g_bc = grads[head + 3];

  std::vector<double> d_emb(d), d_raw(d), d_feat(f);
  for (std::size_t i = 0; i < m; ++i) {
    const SampleCache& sc = cache.samples[i];
    const auto dl = d_logits.row(i);

    // Final embedding as seen by the classifier.
    std::vector<double> emb(sc.raw_embedding);
    if (cfg.normalize_embeddings && sc.raw_norm > 0.0) {
      for (auto& v : emb) v /= sc.raw_norm;
    }

    const auto de = d_embeddings.row(i);
    std::copy(de.begin(), de.end(), d_emb.begin());
    for (std::size_t k = 0; k < c; ++k) {
      g_bc.values[k] += dl[k];
      for (std::size_t j = 0; j < d; ++j) {
        g_wc.values[k * d + j] += dl[k] * emb[j];
        d_emb[j] += wc.values[k * d + j] * dl[k];
      }
    }

    if (cfg.normalize_embeddings) {
      if (sc.raw_norm > 0.0) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += emb[j] * d_emb[j];
        for (std::size_t j = 0; j < d; ++j) d_raw[j] = (d_emb[j] - emb[j] * dot) / sc.raw_norm;
      } else {
        std::fill(d_raw.begin(), d_raw.end(), 0.0);
      }
    } else {
      d_raw = d_emb;
    }

    std::fill(d_feat.begin(), d_feat.end(), 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      g_be.values[k] += d_raw[k];
      for (std::size_t j = 0; j < f; ++j) {
        g_we.values[k * f + j] += d_raw[k] * sc.features[j];
        d_feat[j] += we.values[k * f + j] * d_raw[k];
      }
    }

    // Global average pool.
    const auto& last = layers.back();
    const std::size_t last_plane = static_cast<std::size_t>(last.out_side) * last.out_side;
    std::vector<double> d_act(f * last_plane);
    for (std::size_t ch = 0; ch < f; ++ch) {
      const double g = d_feat[ch] / static_cast<double>(last_plane);
      std::fill_n(d_act.begin() + static_cast<std::ptrdiff_t>(ch * last_plane), last_plane, g);
    }

    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& g = layers[l];
      const std::size_t plane = static_cast<std::size_t>(g.side) * g.side;
      std::vector<double> d_z(plane * g.out_ch, 0.0);
      if (cfg.conv_specs[l].pool) {
        const auto& winners = sc.argmax[l];
        for (std::size_t o = 0; o < winners.size(); ++o) d_z[winners[o]] += d_act[o];
      } else {
        d_z = d_act;
      }
      const auto& z = sc.pre_relu[l];
      for (std::size_t p = 0; p < d_z.size(); ++p) {
        if (!(z[p] > 0.0)) d_z[p] = 0.0;
      }
      std::vector<double> d_in;
      if (l > 0) d_in.resize(plane * g.in_ch);
      conv3x3_backward(sc.conv_inputs[l].data(), g.in_ch, g.side, g.side,
                       params[2 * l].values.data(), g.out_ch, d_z.data(),
                       grads[2 * l].values.data(), grads[2 * l + 1].values.data(),
                       l > 0 ? d_in.data() : nullptr);
      d_act = std::move(d_in);
    }
  }
  return grads;
}

std::string first_non_finite(std::span<const Tensor> tensors) {
  for (const auto& t : tensors) {
    for (double v : t.values) {
      if (!std::isfinite(v)) return t.name;
    }
  }
  return {};
}

}  // namespace xmodal
