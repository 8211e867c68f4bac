// SPDX-License-Identifier: Apache-2.0
#include "csidn/channel.hpp"

#include <cmath>

#include "csidn/rng.hpp"

namespace csidn {

namespace {
constexpr double kPi = 3.14159265358979323846;
// Exponential power-delay profile decay, as a fraction of the delay spread.
constexpr double kPdpDecayFraction = 0.25;
}  // namespace

void ChannelConfig::validate() const {
  if (n_t == 0 || n_c == 0) throw ConfigError("channel: n_t and n_c must be positive");
  if (n_p == 0 || n_p > n_c) {
    throw ConfigError("channel: n_p must satisfy 1 <= n_p <= n_c, got n_p=" +
                      std::to_string(n_p) + ", n_c=" + std::to_string(n_c));
  }
  if (num_paths == 0) throw ConfigError("channel: num_paths must be >= 1");
  if (!(delay_spread_rows > 0.0 && delay_spread_rows <= 1.0)) {
    throw ConfigError("channel: delay_spread_rows must lie in (0, 1], got " +
                      std::to_string(delay_spread_rows));
  }
}

std::vector<PathComponent> draw_paths(const ChannelConfig& cfg, uint64_t sample_index) {
  cfg.validate();
  Rng rng(seed_mix(cfg.master_seed, seed_tag("channel-sample"), sample_index));
  const double max_delay = cfg.delay_spread_rows * static_cast<double>(cfg.n_p);
  const double tau_rms = kPdpDecayFraction * max_delay;

  std::vector<PathComponent> paths(cfg.num_paths);
  for (PathComponent& p : paths) {
    p.theta = rng.uniform(-kPi / 2.0, kPi / 2.0);
    p.delay_rows = rng.uniform(0.0, max_delay);
    const double re = rng.gaussian();
    const double im = rng.gaussian();
    const double amp = std::exp(-p.delay_rows / (2.0 * tau_rms)) / std::sqrt(2.0);
    p.gain = cplx(re * amp, im * amp);
  }
  return paths;
}

CMat synthesize_spatial_frequency(const std::vector<PathComponent>& paths, uint32_t n_c,
                                  uint32_t n_t) {
  CMat h(n_c, n_t);
  std::vector<cplx> steering(n_t);
  for (const PathComponent& p : paths) {
    const double sin_theta = std::sin(p.theta);
    for (uint32_t m = 0; m < n_t; ++m) {
      const double phase = -kPi * static_cast<double>(m) * sin_theta;
      steering[m] = p.gain * cplx(std::cos(phase), std::sin(phase));
    }
    const double dstep = -2.0 * kPi * p.delay_rows / static_cast<double>(n_c);
    for (uint32_t k = 0; k < n_c; ++k) {
      const double phase = dstep * static_cast<double>(k);
      const cplx delay_ph(std::cos(phase), std::sin(phase));
      caxpy(h.row(k), steering.data(), delay_ph, n_t);
    }
  }
  // Rows carry the conjugated channel vectors, which places the delay
  // profile in the leading rows of the angle-delay matrix.
  for (uint32_t k = 0; k < n_c; ++k) {
    cplx* row = h.row(k);
    for (uint32_t m = 0; m < n_t; ++m) row[m] = std::conj(row[m]);
  }
  return h;
}

CMat generate_channel(const ChannelConfig& cfg, uint64_t sample_index) {
  return synthesize_spatial_frequency(draw_paths(cfg, sample_index), cfg.n_c, cfg.n_t);
}

DftPair DftPair::for_dims(uint32_t n_c, uint32_t n_t) {
  return DftPair{dft_matrix(n_c), dft_matrix(n_t)};
}

CMat to_angular_delay(const CMat& h_sf, const DftPair& dft) {
  if (h_sf.rows() != dft.delay.rows() || h_sf.cols() != dft.angle.rows()) {
    throw DimensionError("to_angular_delay: H is " + std::to_string(h_sf.rows()) + "x" +
                         std::to_string(h_sf.cols()) + ", DFT pair is " +
                         std::to_string(dft.delay.rows()) + "/" +
                         std::to_string(dft.angle.rows()));
  }
  return matmul(matmul(dft.delay, h_sf), dft.angle.adjoint());
}

CMat to_angular_delay(const CMat& h_sf) {
  return to_angular_delay(h_sf, DftPair::for_dims(static_cast<uint32_t>(h_sf.rows()),
                                                  static_cast<uint32_t>(h_sf.cols())));
}

CMat from_angular_delay(const CMat& h_ad, const DftPair& dft) {
  return matmul(matmul(dft.delay.adjoint(), h_ad), dft.angle);
}

CMat truncated_angular_delay(const CMat& h_sf, const DftPair& dft, uint32_t n_p) {
  if (h_sf.rows() != dft.delay.rows() || h_sf.cols() != dft.angle.rows()) {
    throw DimensionError("truncated_angular_delay: dims do not match DFT pair");
  }
  if (n_p > h_sf.rows()) {
    throw DimensionError("truncated_angular_delay: n_p exceeds row count");
  }
  const std::size_t n_c = h_sf.rows(), n_t = h_sf.cols();
  CMat mid(n_p, n_t);
  for (uint32_t r = 0; r < n_p; ++r) {
    cplx* row = mid.row(r);
    for (std::size_t k = 0; k < n_c; ++k) caxpy(row, h_sf.row(k), dft.delay(r, k), n_t);
  }
  return matmul(mid, dft.angle.adjoint());
}

Tensor<double> truncate_real_imag(const CMat& h_ad, uint32_t n_p) {
  if (n_p > h_ad.rows()) {
    throw DimensionError("truncate: n_p=" + std::to_string(n_p) + " exceeds rows " +
                         std::to_string(h_ad.rows()));
  }
  const std::size_t n_t = h_ad.cols();
  Tensor<double> t({2, n_p, n_t});
  double* re = t.data();
  double* im = t.data() + static_cast<std::size_t>(n_p) * n_t;
  for (uint32_t r = 0; r < n_p; ++r)
    for (std::size_t c = 0; c < n_t; ++c) {
      re[r * n_t + c] = h_ad(r, c).real();
      im[r * n_t + c] = h_ad(r, c).imag();
    }
  return t;
}

TruncatedCsi truncate_and_scale(const CMat& h_ad, uint32_t n_p, const ScaleBounds& bounds) {
  if (!(bounds.hi > bounds.lo)) {
    throw ConfigError("truncate_and_scale: scale_max must exceed scale_min");
  }
  Tensor<double> raw = truncate_real_imag(h_ad, n_p);
  TruncatedCsi out;
  out.bounds = bounds;
  out.values = Tensor<float>(raw.shape());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double x = raw[i];
    if (x < bounds.lo || x > bounds.hi) {
      throw RangeError("truncate_and_scale: value " + std::to_string(x) +
                       " outside scaling bounds [" + std::to_string(bounds.lo) + ", " +
                       std::to_string(bounds.hi) + "]");
    }
    out.values[i] = static_cast<float>(apply_scale(x, bounds));
  }
  return out;
}

}  // namespace csidn
