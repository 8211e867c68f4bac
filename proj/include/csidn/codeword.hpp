// SPDX-License-Identifier: Apache-2.0

/**
 * @file codeword.hpp
 * @brief Feedback codewords: L2 normalization, the SNR/noise-power relation
 *        and additive Gaussian link noise.
 *
 * With unit-norm codewords the link SNR is 1 / (N_cw * sigma^2), so a
 * target SNR in dB fixes the per-element noise variance exactly.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "csidn/error.hpp"
#include "csidn/rng.hpp"
#include "csidn/tensor.hpp"

namespace csidn {

template <typename T>
struct Codeword {
  Tensor<T> values;  // shape {n_cw}
  bool normalized = false;
};

inline double snr_to_sigma_sq(double snr_db, std::size_t n_cw) {
  if (n_cw == 0) throw ConfigError("snr_to_sigma_sq: codeword length must be positive");
  return 1.0 / (static_cast<double>(n_cw) * std::pow(10.0, snr_db / 10.0));
}

struct NoiseModel {
  double snr_db = 0.0;
  double sigma_sq = 0.0;

  static NoiseModel from_snr(double snr_db, std::size_t n_cw) {
    return {snr_db, snr_to_sigma_sq(snr_db, n_cw)};
  }
};

template <typename T>
Codeword<T> normalize_codeword(const Codeword<T>& s) {
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    norm_sq += static_cast<double>(s.values[i]) * static_cast<double>(s.values[i]);
  }
  if (norm_sq <= 0.0) throw DegenerateError("normalize_codeword: zero-norm codeword");
  const T inv = static_cast<T>(1.0 / std::sqrt(norm_sq));
  Codeword<T> out;
  out.values = Tensor<T>(s.values.shape());
  for (std::size_t i = 0; i < s.values.size(); ++i) out.values[i] = s.values[i] * inv;
  out.normalized = true;
  return out;
}

template <typename T>
Codeword<T> add_noise(const Codeword<T>& s, const NoiseModel& noise, Rng& rng) {
  Codeword<T> out = s;
  out.normalized = false;
  const double sigma = std::sqrt(noise.sigma_sq);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] += static_cast<T>(sigma * rng.gaussian());
  }
  return out;
}

/// In-place i.i.d. Gaussian noise on a {batch, n_cw} tensor.
template <typename T>
void add_noise_batch(Tensor<T>& s, double sigma_sq, Rng& rng) {
  const double sigma = std::sqrt(sigma_sq);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += static_cast<T>(sigma * rng.gaussian());
}

// Row-wise L2 normalization with a reverse pass, for use inside the
// training graph.
template <typename T>
class NormalizeLayer {
 public:
  Tensor<T> forward(const Tensor<T>& s) {
    if (s.rank() != 2) {
      throw DimensionError("normalize: expected {batch, n_cw}, got " + shape_str(s.shape()));
    }
    const std::size_t batch = s.dim(0), n = s.dim(1);
    y_ = Tensor<T>({batch, n});
    inv_norm_ = Tensor<T>({batch});
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = s.data() + b * n;
      double norm_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm_sq += static_cast<double>(row[i]) * row[i];
      if (norm_sq <= 0.0) {
        throw DegenerateError("normalize: zero-norm codeword in batch row " + std::to_string(b));
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(norm_sq));
      inv_norm_[b] = inv;
      T* yrow = y_.data() + b * n;
      for (std::size_t i = 0; i < n; ++i) yrow[i] = row[i] * inv;
    }
    has_cache_ = true;
    return y_;
  }

  // d(s/|s|)/ds applied to dy: (dy - y (y . dy)) / |s|.
  Tensor<T> backward(const Tensor<T>& dy) {
    if (!has_cache_) throw StateError("normalize backward before forward");
    check_same_shape(dy, y_, "normalize backward");
    const std::size_t batch = dy.dim(0), n = dy.dim(1);
    Tensor<T> dx({batch, n});
    for (std::size_t b = 0; b < batch; ++b) {
      const T* yrow = y_.data() + b * n;
      const T* dyrow = dy.data() + b * n;
      T* dxrow = dx.data() + b * n;
      double proj = 0.0;
      for (std::size_t i = 0; i < n; ++i) proj += static_cast<double>(yrow[i]) * dyrow[i];
      const T p = static_cast<T>(proj);
      for (std::size_t i = 0; i < n; ++i) {
        dxrow[i] = (dyrow[i] - yrow[i] * p) * inv_norm_[b];
      }
    }
    return dx;
  }

 private:
  Tensor<T> y_, inv_norm_;
  bool has_cache_ = false;
};

}  // namespace csidn
