#include "xmodal/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "xmodal/errors.hpp"

namespace xmodal {

CenterTable::CenterTable(std::size_t num_classes, std::size_t dim, double alpha_)
    : centers(num_classes, dim), alpha(alpha_) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DataError("center alpha must lie in (0, 1]");
}

namespace {

void check_labels(const Matrix& embeddings, std::span<const int> labels, const CenterTable& centers) {
  if (labels.size() != embeddings.rows) throw DataError("label count does not match embedding rows");
  if (embeddings.cols != centers.centers.cols) {
    throw DataError("embedding dimension does not match the center table");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= centers.centers.rows) {
      throw DataError("label " + std::to_string(y) + " out of range [0, " +
                      std::to_string(centers.centers.rows) + ")");
    }
  }
}

}  // namespace

double center_loss(const Matrix& embeddings, std::span<const int> labels, const CenterTable& centers) {
  check_labels(embeddings, labels, centers);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto x = embeddings.row(i);
    const auto c = centers.centers.row(static_cast<std::size_t>(labels[i]));
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double diff = x[k] - c[k];
      sum += diff * diff;
    }
  }
  return 0.5 * sum;
}

Matrix center_loss_grad(const Matrix& embeddings, std::span<const int> labels,
                        const CenterTable& centers) {
  check_labels(embeddings, labels, centers);
  Matrix grad(embeddings.rows, embeddings.cols);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto x = embeddings.row(i);
    const auto c = centers.centers.row(static_cast<std::size_t>(labels[i]));
    auto g = grad.row(i);
    for (std::size_t k = 0; k < x.size(); ++k) g[k] = x[k] - c[k];
  }
  return grad;
}

void update_centers(CenterTable& centers, const Matrix& embeddings, std::span<const int> labels) {
  check_labels(embeddings, labels, centers);
  const std::size_t dim = centers.centers.cols;
  Matrix delta(centers.centers.rows, dim);
  std::vector<int> counts(centers.centers.rows, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto j = static_cast<std::size_t>(labels[i]);
    ++counts[j];
    const auto x = embeddings.row(i);
    const auto c = centers.centers.row(j);
    auto dj = delta.row(j);
    for (std::size_t k = 0; k < dim; ++k) dj[k] += c[k] - x[k];
  }
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) continue;
    const double scale = centers.alpha / (1.0 + counts[j]);
    auto c = centers.centers.row(j);
    const auto dj = delta.row(j);
    for (std::size_t k = 0; k < dim; ++k) c[k] -= scale * dj[k];
  }
}

LossResult total_loss(const Matrix& logits, const Matrix& embeddings, std::span<const int> labels,
                      const CenterTable& centers, double lambda) {
  if (!(lambda >= 0.0)) throw DataError("lambda must be >= 0");
  check_labels(embeddings, labels, centers);
  const std::size_t m = labels.size();
  const std::size_t classes = logits.cols;
  if (logits.rows != m) throw DataError("logit rows do not match label count");
  for (int y : labels) {
    if (static_cast<std::size_t>(y) >= classes) {
      throw DataError("label " + std::to_string(y) + " out of range for " +
                      std::to_string(classes) + " logits");
    }
  }

  LossResult r;
  r.d_logits = Matrix(m, classes);
  const double inv_m = 1.0 / static_cast<double>(m);
  double ce_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - zmax);
    const double log_denom = std::log(denom);
    const auto y = static_cast<std::size_t>(labels[i]);
    ce_sum += log_denom - (z[y] - zmax);
    auto g = r.d_logits.row(i);
    for (std::size_t k = 0; k < classes; ++k) {
      g[k] = std::exp(z[k] - zmax - log_denom) * inv_m;
    }
    g[y] -= inv_m;
  }
  r.cross_entropy = ce_sum * inv_m;
  r.center = center_loss(embeddings, labels, centers) * inv_m;
  r.total = r.cross_entropy + lambda * r.center;

  r.d_embeddings = center_loss_grad(embeddings, labels, centers);
  for (auto& v : r.d_embeddings.values) v *= lambda * inv_m;
  return r;
}

}  // namespace xmodal
