#include "unigest/tensor.hpp"

#include <cmath>

#include "unigest/errors.hpp"

namespace unigest {

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  int64_t n = 1;
  for (int d : shape_) {
    if (d <= 0) throw InputError("tensor dimensions must be positive");
    n *= d;
  }
  data_.assign(static_cast<size_t>(n), 0.0);
}

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (size_t i = 0; i < shape_.size(); ++i) {
    s += std::to_string(shape_[i]);
    if (i + 1 < shape_.size()) s += "x";
  }
  s += ")";
  return s;
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace unigest
