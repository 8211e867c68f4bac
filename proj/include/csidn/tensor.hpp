// SPDX-License-Identifier: Apache-2.0

/**
 * @file tensor.hpp
 * @brief Dense row-major N-dimensional array, the carrier for activations,
 *        parameters and gradients. Templated on element type: float for
 *        training, double for gradient verification.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "csidn/error.hpp"

namespace csidn {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return s.empty() ? 0 : n;
}

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    for (std::size_t d : shape_) {
      if (d == 0) throw DimensionError("tensor dimension must be positive, got " + shape_str(shape_));
    }
  }

  static Tensor from(Shape shape, std::vector<T> data) {
    Tensor t;
    if (shape_numel(shape) != data.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  const std::vector<T>& vec() const { return data_; }

  // Metadata-only reshape; element count must be preserved.
  void set_shape(Shape s) {
    if (shape_numel(s) != data_.size()) {
      throw DimensionError("reshape " + shape_str(shape_) + " -> " + shape_str(s) +
                           " changes element count");
    }
    shape_ = std::move(s);
  }

  Tensor reshaped(Shape s) const& {
    Tensor t = *this;
    t.set_shape(std::move(s));
    return t;
  }

  Tensor reshaped(Shape s) && {
    set_shape(std::move(s));
    return std::move(*this);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

}  // namespace csidn
