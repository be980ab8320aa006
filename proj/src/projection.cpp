#include "xmodal/projection.hpp"

#include <cmath>
#include <vector>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

namespace xmodal {

Matrix covariance(const Matrix& data) {
  const std::size_t n = data.rows;
  const std::size_t d = data.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += data(i, k);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  Matrix cov(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = data(i, a) - mean[a];
      for (std::size_t b = a; b < d; ++b) cov(a, b) += da * (data(i, b) - mean[b]);
    }
  }
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= denom;
      cov(b, a) = cov(a, b);
    }
  }
  return cov;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void multiply(const Matrix& m, std::span<const double> v, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows; ++r) out[r] = dot(m.row(r), v);
}

void remove_component(std::span<double> v, std::span<const double> unit) {
  const double p = dot(v, unit);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * unit[i];
}

// Dominant eigenpair of a symmetric PSD matrix, optionally kept orthogonal
// to an earlier component. Returns eigenvalue 0 when the matrix annihilates
// the iterate.
double dominant_eigenpair(const Matrix& m, std::span<double> v, std::span<const double> orthogonal_to,
                          const PowerIterationOptions& opt) {
  const std::size_t d = m.rows;
  std::vector<double> next(d);
  auto normalize = [](std::span<double> x) {
    const double n = std::sqrt(dot(x, x));
    if (n > 0.0) {
      for (auto& e : x) e /= n;
    }
    return n;
  };
  if (!orthogonal_to.empty()) remove_component(v, orthogonal_to);
  if (normalize(v) == 0.0) return 0.0;

  for (int it = 0; it < opt.max_iterations; ++it) {
    multiply(m, v, next);
    if (!orthogonal_to.empty()) remove_component(next, orthogonal_to);
    if (normalize(next) == 0.0) return 0.0;
    double change = 0.0;
    for (std::size_t i = 0; i < d; ++i) change += (next[i] - v[i]) * (next[i] - v[i]);
    std::copy(next.begin(), next.end(), v.begin());
    if (std::sqrt(change) < opt.tolerance) break;
  }
  multiply(m, v, next);
  return dot(v, next);
}

}  // namespace

Projection project_2d(const Matrix& data, const PowerIterationOptions& options) {
  const std::size_t n = data.rows;
  const std::size_t d = data.cols;
  if (n < 3) throw DataError("projection needs at least 3 points");
  if (d < 1) throw DataError("projection needs D >= 1");

  Matrix cov = covariance(data);
  Projection out;
  out.coords = Matrix(n, 2);
  out.components = Matrix(2, d);

  double trace = 0.0;
  for (std::size_t k = 0; k < d; ++k) trace += cov(k, k);
  if (!(trace > 0.0)) {
    out.zero_variance = true;
    return out;
  }

  Rng rng(derive_seed(options.seed, "project"));
  auto first = out.components.row(0);
  for (auto& e : first) e = rng.normal();
  out.eigenvalues[0] = dominant_eigenpair(cov, first, {}, options);

  // Deflate, then iterate for the second component.
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) cov(a, b) -= out.eigenvalues[0] * first[a] * first[b];
  }
  auto second = out.components.row(1);
  if (d > 1) {
    for (auto& e : second) e = rng.normal();
    out.eigenvalues[1] = dominant_eigenpair(cov, second, first, options);
  }

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += data(i, k);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) centered[k] = data(i, k) - mean[k];
    out.coords(i, 0) = dot(centered, first);
    out.coords(i, 1) = d > 1 ? dot(centered, second) : 0.0;
  }
  return out;
}

}  // namespace xmodal
