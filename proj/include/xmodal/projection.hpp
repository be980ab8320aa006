#pragma once

#include <cstdint>

#include "xmodal/tensor.hpp"

namespace xmodal {

struct PowerIterationOptions {
  double tolerance = 1e-9;
  int max_iterations = 1000;
  std::uint64_t seed = 42;
};

struct Projection {
  Matrix coords;                  // N x 2, mean-centered scores
  double eigenvalues[2] = {0, 0}; // of the sample covariance (divisor N - 1)
  Matrix components;              // 2 x D unit vectors
  bool zero_variance = false;     // all coordinates are zero
};

// Sample covariance of the rows, D x D.
Matrix covariance(const Matrix& data);

// Top-2 principal components by power iteration with deflation.
// Throws DataError when N < 3.
Projection project_2d(const Matrix& data, const PowerIterationOptions& options = {});

}  // namespace xmodal
