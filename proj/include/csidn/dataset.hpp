// SPDX-License-Identifier: Apache-2.0

/**
 * @file dataset.hpp
 * @brief Binary CSI dataset files ("CSID") and split generation.
 *
 * Layout, little-endian: magic "CSID", u16 version = 1, u32 n_t, n_c, n_p,
 * sample_count, f64 scale_min, scale_max, u64 master_seed, then
 * sample_count payloads of 2*n_p*n_t f32 values in (channel, row, column)
 * row-major order. The three splits of one dataset share identical scale
 * bounds and cover disjoint sample_index ranges: train samples start at 0,
 * validation continues after train, test after validation.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csidn/channel.hpp"
#include "csidn/tensor.hpp"

namespace csidn {

inline constexpr char kDatasetMagic[4] = {'C', 'S', 'I', 'D'};
inline constexpr uint16_t kDatasetVersion = 1;

struct DatasetHeader {
  uint32_t n_t = 0;
  uint32_t n_c = 0;
  uint32_t n_p = 0;
  uint32_t sample_count = 0;
  double scale_min = 0.0;
  double scale_max = 1.0;
  uint64_t master_seed = 0;

  ScaleBounds bounds() const { return {scale_min, scale_max}; }
};

// One split, fully resident in memory.
class CsiDataset {
 public:
  DatasetHeader header;
  std::vector<float> payload;  // sample_count x (2 * n_p * n_t)

  std::size_t sample_dim() const {
    return 2ull * header.n_p * header.n_t;
  }
  std::size_t count() const { return header.sample_count; }
  const float* sample_ptr(std::size_t i) const { return payload.data() + i * sample_dim(); }

  Tensor<float> sample(std::size_t i) const;

  /// Copy the listed samples into a {B, 2, n_p, n_t} batch tensor.
  template <typename T>
  void gather(const std::vector<std::size_t>& indices, Tensor<T>& out) const {
    const std::size_t d = sample_dim();
    out = Tensor<T>({indices.size(), 2, header.n_p, header.n_t});
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const float* src = sample_ptr(indices[b]);
      T* dst = out.data() + b * d;
      for (std::size_t i = 0; i < d; ++i) dst[i] = static_cast<T>(src[i]);
    }
  }

  void save(const std::filesystem::path& path) const;
  static CsiDataset load(const std::filesystem::path& path);
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct DatasetPaths {
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path test;

  static DatasetPaths in_dir(const std::filesystem::path& dir) {
    return {dir / "train.csid", dir / "val.csid", dir / "test.csid"};
  }
};

/// Generate the three splits and write them under `dir`. When `bounds` is
/// absent they are computed from the training split's min/max with a 5%
/// margin; either way all three headers record identical bounds.
DatasetPaths build_dataset(const ChannelConfig& cfg, const SplitCounts& counts,
                           std::optional<ScaleBounds> bounds, const std::filesystem::path& dir);

}  // namespace csidn
