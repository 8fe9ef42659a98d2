#include "sonarssl/tensor.hpp"

#include <string>

namespace sonarssl {

Tensor::Tensor(std::vector<std::size_t> shape_in, double fill) : shape(std::move(shape_in)) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d != 0 && n > (std::size_t{1} << 40) / d) throw InputError("tensor: shape too large");
    n *= d;
  }
  data.assign(n, fill);
}

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= shape.size()) throw InputError("tensor: dimension index out of range");
  return shape[i];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw InputError(std::string(what) + ": tensor shapes differ");
}

}  // namespace sonarssl
