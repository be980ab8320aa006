#include "xmodal/optimizer.hpp"

#include <cmath>
#include <string>

#include "xmodal/errors.hpp"

namespace xmodal {

AdamState AdamState::zeros_like(std::span<const Tensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               std::int64_t t, const AdamConfig& config) {
  if (t < 1) throw DataError("Adam step index must be >= 1");
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DataError("Adam state does not match the parameter set");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (grads[p].size() != params[p].size() || state.m[p].size() != params[p].size()) {
      throw DataError("gradient shape mismatch for " + params[p].name);
    }
    for (double g : grads[p].values) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in " + params[p].name);
    }
  }

  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& values = params[p].values;
    const auto& g = grads[p].values;
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
  state.step = t;
}

}  // namespace xmodal
