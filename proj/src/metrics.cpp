// SPDX-License-Identifier: Apache-2.0
#include "csidn/metrics.hpp"

#include <cmath>

#include "csidn/error.hpp"

namespace csidn {

namespace {

void check_dims(const CMat& truth, const CMat& recon, const char* what) {
  if (truth.rows() != recon.rows() || truth.cols() != recon.cols()) {
    throw DimensionError(std::string(what) + ": dims " + std::to_string(truth.rows()) + "x" +
                         std::to_string(truth.cols()) + " vs " + std::to_string(recon.rows()) +
                         "x" + std::to_string(recon.cols()));
  }
}

double rho_of_pair(const CMat& truth, const CMat& recon) {
  double acc = 0.0;
  for (std::size_t n = 0; n < truth.rows(); ++n) {
    const cplx* h = truth.row(n);
    const cplx* hh = recon.row(n);
    cplx dot{0.0, 0.0};
    double nh = 0.0, nhh = 0.0;
    for (std::size_t m = 0; m < truth.cols(); ++m) {
      dot += std::conj(hh[m]) * h[m];
      nh += std::norm(h[m]);
      nhh += std::norm(hh[m]);
    }
    if (nh <= 0.0) {
      throw DegenerateError("cosine_correlation: zero-norm true subcarrier row " +
                            std::to_string(n));
    }
    if (nhh > 0.0) acc += std::abs(dot) / std::sqrt(nh * nhh);
  }
  return acc / static_cast<double>(truth.rows());
}

}  // namespace

double nmse_ratio(const CMat& truth, const CMat& recon) {
  check_dims(truth, recon, "nmse");
  const double den = truth.fro_norm_sq();
  if (den <= 0.0) throw DegenerateError("nmse: zero-norm true channel");
  double num = 0.0;
  for (std::size_t r = 0; r < truth.rows(); ++r)
    for (std::size_t c = 0; c < truth.cols(); ++c) num += std::norm(truth(r, c) - recon(r, c));
  const double ratio = num / den;
  return ratio < kNmseFloorLinear ? kNmseFloorLinear : ratio;
}

double nmse_db(const CMat& truth, const CMat& recon) {
  return 10.0 * std::log10(nmse_ratio(truth, recon));
}

double cosine_correlation(const CMat& truth, const CMat& recon) {
  check_dims(truth, recon, "cosine_correlation");
  return rho_of_pair(truth, recon);
}

bool MetricAccumulator::add(const CMat& truth, const CMat& recon) {
  check_dims(truth, recon, "metrics");
  bool degenerate = truth.fro_norm_sq() <= 0.0;
  if (!degenerate) {
    for (std::size_t n = 0; n < truth.rows() && !degenerate; ++n) {
      double nh = 0.0;
      for (std::size_t m = 0; m < truth.cols(); ++m) nh += std::norm(truth(n, m));
      degenerate = nh <= 0.0;
    }
  }
  if (degenerate) {
    ++skipped_;
    return false;
  }
  ratio_sum_ += nmse_ratio(truth, recon);
  rho_sum_ += rho_of_pair(truth, recon);
  ++used_;
  return true;
}

double MetricAccumulator::nmse_db() const {
  if (used_ == 0) throw StateError("metrics: no samples accumulated");
  return 10.0 * std::log10(ratio_sum_ / static_cast<double>(used_));
}

double MetricAccumulator::rho() const {
  if (used_ == 0) throw StateError("metrics: no samples accumulated");
  return rho_sum_ / static_cast<double>(used_);
}

}  // namespace csidn
