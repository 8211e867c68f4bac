// SPDX-License-Identifier: Apache-2.0

/**
 * @file metrics.hpp
 * @brief Reconstruction quality metrics in the spatial-frequency domain:
 *        normalized MSE (dB, floored at -100) and per-subcarrier cosine
 *        correlation.
 */

#pragma once

#include <cstddef>

#include "csidn/complex_mat.hpp"

namespace csidn {

inline constexpr double kNmseFloorLinear = 1e-10;  // -100 dB

/// Per-pair linear error ratio ||H - Hhat||^2 / ||H||^2, floored.
double nmse_ratio(const CMat& truth, const CMat& recon);

/// Single-pair NMSE in dB.
double nmse_db(const CMat& truth, const CMat& recon);

/// Mean over subcarrier rows n of |hhat_n^H h_n| / (|hhat_n| |h_n|).
/// A zero-norm reconstructed row contributes 0; a zero-norm true row is a
/// degenerate sample.
double cosine_correlation(const CMat& truth, const CMat& recon);

// Streaming aggregation over an evaluation set: mean of floored NMSE
// ratios (then dB) and mean rho. Degenerate samples (zero-norm truth) are
// skipped and counted.
class MetricAccumulator {
 public:
  /// Returns false when the sample was skipped as degenerate.
  bool add(const CMat& truth, const CMat& recon);

  double nmse_db() const;
  double rho() const;
  std::size_t used() const { return used_; }
  std::size_t skipped() const { return skipped_; }

 private:
  double ratio_sum_ = 0.0;
  double rho_sum_ = 0.0;
  std::size_t used_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace csidn
