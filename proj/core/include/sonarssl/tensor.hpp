#pragma once

#include <cstddef>
#include <vector>

#include "sonarssl/error.hpp"

namespace sonarssl {

// Dense row-major n-d array of doubles. Just storage plus shape bookkeeping;
// the layers do their math through Eigen maps over `data`.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_in, double fill = 0.0);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape); }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  // Bounds-checked dimension lookup.
  std::size_t dim(std::size_t i) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

// Throws InputError unless the two shapes match; `what` names the operation.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace sonarssl
