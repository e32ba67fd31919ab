// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mimicenh/tensor.h"

#include <algorithm>
#include <cmath>

#include "mimicenh/common.h"

namespace mimicenh {

Tensor::Tensor(std::vector<int64_t> shape, double fill) : shape_(std::move(shape)) {
  int64_t n = 1;
  for (int64_t d : shape_) {
    if (d < 0) throw ValidationError("tensor dimension must be nonnegative");
    n *= d;
  }
  data_.assign(static_cast<size_t>(n), fill);
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data_[0] = v;
  return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
  Tensor t;
  t.shape_ = {static_cast<int64_t>(v.size())};
  t.data_ = std::move(v);
  return t;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
  int64_t n = 1;
  for (int64_t d : new_shape) n *= d;
  if (n != numel())
    throw ValidationError("reshape element count mismatch: " + shape_str());
  Tensor t = *this;
  t.shape_ = std::move(new_shape);
  return t;
}

}  // namespace mimicenh
