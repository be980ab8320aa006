#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

struct ConvSpec {
  int out_channels = 8;
  bool pool = true;  // 2x2 max pool after the ReLU

  bool operator==(const ConvSpec&) const = default;
};

// "8p,16p" <-> {{8, pool}, {16, pool}}; a bare number means no pooling.
std::vector<ConvSpec> parse_conv_specs(std::string_view text);
std::string format_conv_specs(std::span<const ConvSpec> specs);

struct NetworkConfig {
  int input_side = 64;
  std::vector<ConvSpec> conv_specs = {{8, true}, {16, true}};
  int embedding_dim = 128;
  int num_classes = 2;
  double lambda_center = 0.1;
  bool normalize_embeddings = false;
  std::uint64_t seed = 42;

  // Throws DataError on a violated invariant or when pooling collapses the
  // spatial extent below one pixel.
  void validate() const;

  bool operator==(const NetworkConfig&) const = default;
};

// The single parameter store shared by both modalities. Tensors are
// conv{i}.weight [out, in, 3, 3], conv{i}.bias [out], embed.weight [D, F],
// embed.bias [D], classifier.weight [C, D], classifier.bias [C].
class EmbeddingNet {
public:
  explicit EmbeddingNet(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  std::span<Tensor> parameters() { return params_; }
  std::span<const Tensor> parameters() const { return params_; }
  Tensor& parameter(std::string_view name);
  const Tensor& parameter(std::string_view name) const;

  std::size_t conv_count() const { return config_.conv_specs.size(); }
  int feature_dim() const;  // channels entering the embedding head

  // Zero-valued tensors shaped like the parameters.
  std::vector<Tensor> zeros_like() const;

private:
  NetworkConfig config_;
  std::vector<Tensor> params_;
};

// He-normal weights (std sqrt(2 / fan_in)), zero biases, seeded from the
// "init" sub-stream of config.seed.
EmbeddingNet init_network(const NetworkConfig& config);

struct Batch {
  Tensor inputs;                    // m x 3 x side x side
  std::vector<int> labels;          // m class ids
  std::vector<Modality> modality;   // m tags

  std::size_t size() const { return labels.size(); }
};

// Per-sample intermediate values kept for the backward pass.
struct SampleCache {
  std::vector<std::vector<double>> conv_inputs;   // activation entering conv i
  std::vector<std::vector<double>> pre_relu;      // conv i output before ReLU
  std::vector<std::vector<std::uint32_t>> argmax; // pool winners (empty if no pool)
  std::vector<double> features;                   // after global average pooling
  std::vector<double> raw_embedding;              // before optional normalization
  double raw_norm = 0.0;
};

struct ForwardCache {
  std::size_t parameter_count = 0;
  int input_side = 0;
  std::vector<SampleCache> samples;
};

struct ForwardResult {
  Matrix embeddings;  // m x D
  Matrix logits;      // m x C
  ForwardCache cache;
};

ForwardResult forward(const EmbeddingNet& net, const Batch& batch);

// Reverse pass given upstream gradients w.r.t. embeddings and logits.
// Returns one gradient tensor per parameter, in parameter order.
std::vector<Tensor> backward(const EmbeddingNet& net, const ForwardCache& cache,
                             const Matrix& d_embeddings, const Matrix& d_logits);

// Name of the first tensor containing NaN/Inf, or empty.
std::string first_non_finite(std::span<const Tensor> tensors);

}  // namespace xmodal
