// SPDX-License-Identifier: Apache-2.0

/**
 * @file channel.hpp
 * @brief Synthetic sparse multipath channel generation and the transforms
 *        between the spatial-frequency and angle-delay domains.
 *
 * A channel sample is a sum of num_paths plane-wave components over a ULA
 * with half-wavelength spacing. Delays follow an exponential power profile
 * inside the first n_p delay rows, so the angle-delay matrix concentrates
 * its energy there and truncation is close to lossless. Every sample is
 * fully determined by (master_seed, sample_index).
 */

#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "csidn/complex_mat.hpp"
#include "csidn/dft.hpp"
#include "csidn/error.hpp"
#include "csidn/tensor.hpp"

namespace csidn {

struct ChannelConfig {
  uint32_t n_t = 32;   // BS antennas
  uint32_t n_c = 256;  // subcarriers
  uint32_t n_p = 32;   // retained delay rows
  uint32_t num_paths = 8;
  double delay_spread_rows = 1.0;  // max delay as a fraction of n_p
  uint64_t master_seed = 1;

  void validate() const;
};

struct PathComponent {
  cplx gain;
  double theta;       // angle of departure, (-pi/2, pi/2)
  double delay_rows;  // delay in units of delay-domain rows
};

/// Deterministic per-sample path draw.
std::vector<PathComponent> draw_paths(const ChannelConfig& cfg, uint64_t sample_index);

/// Spatial-frequency CSI with subcarrier k in row k (conjugate-transposed
/// stacking of the per-subcarrier channel vectors).
CMat synthesize_spatial_frequency(const std::vector<PathComponent>& paths, uint32_t n_c,
                                  uint32_t n_t);

CMat generate_channel(const ChannelConfig& cfg, uint64_t sample_index);

// Prebuilt unitary DFT matrices for one geometry; building them costs
// O(n_c^2), so hot paths reuse a pair.
struct DftPair {
  CMat delay;  // n_c x n_c
  CMat angle;  // n_t x n_t

  static DftPair for_dims(uint32_t n_c, uint32_t n_t);
};

/// H_ad = F_delay * H_sf * F_angle^H. Norm-preserving.
CMat to_angular_delay(const CMat& h_sf, const DftPair& dft);
CMat to_angular_delay(const CMat& h_sf);

/// Only the first n_p rows of the angle-delay transform: what truncation
/// keeps. Equal to the corresponding rows of to_angular_delay.
CMat truncated_angular_delay(const CMat& h_sf, const DftPair& dft, uint32_t n_p);

/// Inverse transform: H_sf = F_delay^H * H_ad * F_angle.
CMat from_angular_delay(const CMat& h_ad, const DftPair& dft);

struct ScaleBounds {
  double lo = 0.0;
  double hi = 1.0;
};

inline double apply_scale(double x, const ScaleBounds& b) { return (x - b.lo) / (b.hi - b.lo); }
inline double invert_scale(double u, const ScaleBounds& b) { return b.lo + u * (b.hi - b.lo); }

/// First n_p rows of H_ad split into a real {2, n_p, n_t} tensor
/// (channel 0 = real part, channel 1 = imaginary part), unscaled.
Tensor<double> truncate_real_imag(const CMat& h_ad, uint32_t n_p);

struct TruncatedCsi {
  Tensor<float> values;  // {2, n_p, n_t}, affinely mapped into [0,1]
  ScaleBounds bounds;
};

/// Truncate, split real/imag and map into [0,1]. Values outside the bounds
/// raise RangeError.
TruncatedCsi truncate_and_scale(const CMat& h_ad, uint32_t n_p, const ScaleBounds& bounds);

/// Reverse of the full preprocessing chain: unscale, recombine complex,
/// zero-pad the delay rows and transform back to the spatial-frequency
/// domain. Exploits the zero padding, so only the first n_p rows of the
/// delay DFT participate.
template <typename T>
CMat inverse_pipeline(const Tensor<T>& scaled, const ScaleBounds& bounds, const DftPair& dft) {
  if (scaled.rank() != 3 || scaled.dim(0) != 2) {
    throw DimensionError("inverse_pipeline: expected {2, n_p, n_t}, got " +
                         shape_str(scaled.shape()));
  }
  const std::size_t n_p = scaled.dim(1), n_t = scaled.dim(2);
  const std::size_t n_c = dft.delay.rows();
  if (n_p > n_c || dft.angle.rows() != n_t) {
    throw DimensionError("inverse_pipeline: tensor dims do not match DFT pair");
  }
  CMat h_top(n_p, n_t);  // nonzero rows of the padded angle-delay matrix
  const T* re = scaled.data();
  const T* im = scaled.data() + n_p * n_t;
  for (std::size_t r = 0; r < n_p; ++r)
    for (std::size_t c = 0; c < n_t; ++c) {
      h_top(r, c) = cplx(invert_scale(static_cast<double>(re[r * n_t + c]), bounds),
                         invert_scale(static_cast<double>(im[r * n_t + c]), bounds));
    }
  // F_delay^H restricted to the first n_p columns, times h_top, times F_angle.
  CMat h_mid(n_c, n_t);
  for (std::size_t i = 0; i < n_c; ++i) {
    cplx* out = h_mid.row(i);
    for (std::size_t r = 0; r < n_p; ++r) {
      caxpy(out, h_top.row(r), std::conj(dft.delay(r, i)), n_t);  // (F^H)(i,r)
    }
  }
  return matmul(h_mid, dft.angle);
}

}  // namespace csidn
