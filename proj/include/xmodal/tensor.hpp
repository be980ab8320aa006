#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xmodal {

enum class Modality { image, text };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);

// Named n-d array of doubles, row-major.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::string name, std::vector<std::size_t> shape)
      : name(std::move(name)), shape(std::move(shape)), values(element_count(this->shape), 0.0) {}

  static std::size_t element_count(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  }
  std::size_t size() const { return values.size(); }

  bool operator==(const Tensor&) const = default;
};

// Dense rows x cols matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

}  // namespace xmodal
