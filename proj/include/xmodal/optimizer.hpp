#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xmodal/tensor.hpp"

namespace xmodal {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one per parameter tensor.
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState zeros_like(std::span<const Tensor> params);
  bool operator==(const AdamState&) const = default;
};

// Bias-corrected Adam update for step t >= 1. Throws NumericalError naming
// the first gradient tensor with a NaN/Inf entry; parameters are untouched
// in that case.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               std::int64_t t, const AdamConfig& config);

}  // namespace xmodal
