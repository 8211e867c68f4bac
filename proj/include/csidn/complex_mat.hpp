// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "csidn/error.hpp"

namespace csidn {

using cplx = std::complex<double>;

// Dense row-major complex matrix; just enough linear algebra for the
// angle-delay transforms and the evaluation metrics.
class CMat {
 public:
  CMat() = default;
  CMat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), d_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return d_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return d_[r * cols_ + c]; }

  cplx* data() { return d_.data(); }
  const cplx* data() const { return d_.data(); }
  cplx* row(std::size_t r) { return d_.data() + r * cols_; }
  const cplx* row(std::size_t r) const { return d_.data() + r * cols_; }

  double fro_norm_sq() const {
    double s = 0.0;
    for (const cplx& v : d_) s += std::norm(v);
    return s;
  }
  double fro_norm() const { return std::sqrt(fro_norm_sq()); }

  bool all_finite() const {
    for (const cplx& v : d_) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
  }

  CMat adjoint() const {
    CMat t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = std::conj((*this)(r, c));
    return t;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<cplx> d_;
};

// dst += alpha * src over contiguous complex spans. Spelled out in real
// arithmetic: finite operands only, which avoids the library's
// inf-handling complex multiply and lets the loop vectorize.
inline void caxpy(cplx* dst, const cplx* src, cplx alpha, std::size_t n) {
  double* d = reinterpret_cast<double*>(dst);
  const double* s = reinterpret_cast<const double*>(src);
  const double ar = alpha.real(), ai = alpha.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const double sr = s[2 * i], si = s[2 * i + 1];
    d[2 * i] += ar * sr - ai * si;
    d[2 * i + 1] += ar * si + ai * sr;
  }
}

inline CMat matmul(const CMat& a, const CMat& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  CMat c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cplx* crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      caxpy(crow, b.row(k), a(i, k), n);
    }
  }
  return c;
}

inline double rel_fro_dist(const CMat& a, const CMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("rel_fro_dist: dimension mismatch");
  }
  double num = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) num += std::norm(a(r, c) - b(r, c));
  const double den = a.fro_norm_sq();
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace csidn
