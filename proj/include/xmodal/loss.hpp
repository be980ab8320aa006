#pragma once

#include <span>

#include "xmodal/tensor.hpp"

namespace xmodal {

// One learned center per class in embedding space.
struct CenterTable {
  Matrix centers;      // C x D
  double alpha = 0.5;  // center learning rate, (0, 1]

  CenterTable() = default;
  CenterTable(std::size_t num_classes, std::size_t dim, double alpha);
};

// L_c = 1/2 * sum_i ||x_i - c_{y_i}||^2 over the batch (not averaged).
double center_loss(const Matrix& embeddings, std::span<const int> labels, const CenterTable& centers);

// dL_c/dx_i = x_i - c_{y_i}.
Matrix center_loss_grad(const Matrix& embeddings, std::span<const int> labels,
                        const CenterTable& centers);

// For each class j present in the batch:
//   c_j <- c_j - alpha * sum_{i: y_i = j} (c_j - x_i) / (1 + n_j)
// Classes absent from the batch keep their centers.
void update_centers(CenterTable& centers, const Matrix& embeddings, std::span<const int> labels);

struct LossResult {
  double total = 0.0;          // cross_entropy + lambda * center
  double cross_entropy = 0.0;  // mean softmax cross-entropy
  double center = 0.0;         // L_c / m
  Matrix d_logits;
  Matrix d_embeddings;
};

// Batch-mean softmax cross-entropy plus lambda times the batch-mean center
// loss, with gradients of the total w.r.t. logits and embeddings. Centers
// are held constant; they move only through update_centers.
LossResult total_loss(const Matrix& logits, const Matrix& embeddings, std::span<const int> labels,
                      const CenterTable& centers, double lambda);

}  // namespace xmodal
