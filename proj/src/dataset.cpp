// SPDX-License-Identifier: Apache-2.0
#include "csidn/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "csidn/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset format assumes a little-endian host");

namespace csidn {

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::filesystem::path& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("dataset file truncated: " + path.string());
  return v;
}

}  // namespace

Tensor<float> CsiDataset::sample(std::size_t i) const {
  const std::size_t d = sample_dim();
  std::vector<float> v(sample_ptr(i), sample_ptr(i) + d);
  return Tensor<float>::from({2, header.n_p, header.n_t}, std::move(v));
}

void CsiDataset::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open dataset file for writing: " + path.string());
  os.write(kDatasetMagic, 4);
  write_pod(os, kDatasetVersion);
  write_pod(os, header.n_t);
  write_pod(os, header.n_c);
  write_pod(os, header.n_p);
  write_pod(os, header.sample_count);
  write_pod(os, header.scale_min);
  write_pod(os, header.scale_max);
  write_pod(os, header.master_seed);
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!os) throw IoError("write failed for dataset file: " + path.string());
}

CsiDataset CsiDataset::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset file: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kDatasetMagic, 4) != 0) {
    throw FormatError("bad dataset magic in " + path.string());
  }
  const auto version = read_pod<uint16_t>(is, path);
  if (version != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version) + " in " +
                      path.string());
  }
  CsiDataset ds;
  ds.header.n_t = read_pod<uint32_t>(is, path);
  ds.header.n_c = read_pod<uint32_t>(is, path);
  ds.header.n_p = read_pod<uint32_t>(is, path);
  ds.header.sample_count = read_pod<uint32_t>(is, path);
  ds.header.scale_min = read_pod<double>(is, path);
  ds.header.scale_max = read_pod<double>(is, path);
  ds.header.master_seed = read_pod<uint64_t>(is, path);
  if (ds.header.n_t == 0 || ds.header.n_p == 0 || ds.header.n_c < ds.header.n_p) {
    throw FormatError("inconsistent dataset header dims in " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(ds.header.sample_count) * ds.sample_dim();
  ds.payload.resize(n);
  is.read(reinterpret_cast<char*>(ds.payload.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is || is.gcount() != static_cast<std::streamsize>(n * sizeof(float))) {
    throw FormatError("dataset payload truncated: " + path.string());
  }
  return ds;
}

DatasetPaths build_dataset(const ChannelConfig& cfg, const SplitCounts& counts,
                           std::optional<ScaleBounds> bounds, const std::filesystem::path& dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  const DftPair dft = DftPair::for_dims(cfg.n_c, cfg.n_t);
  const std::size_t total = counts.train + counts.val + counts.test;

  // Truncated but unscaled tensors for every sample, in index order.
  std::vector<Tensor<double>> raw;
  raw.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const CMat h_sf = generate_channel(cfg, i);
    const CMat h_top = truncated_angular_delay(h_sf, dft, cfg.n_p);
    raw.push_back(truncate_real_imag(h_top, cfg.n_p));
  }

  ScaleBounds b;
  if (bounds.has_value()) {
    b = *bounds;
    if (!(b.hi > b.lo)) throw ConfigError("build_dataset: scale_max must exceed scale_min");
  } else {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < counts.train; ++i) {
      for (std::size_t j = 0; j < raw[i].size(); ++j) {
        const double x = raw[i][j];
        if (first || x < lo) lo = x;
        if (first || x > hi) hi = x;
        first = false;
      }
    }
    if (first) throw ConfigError("build_dataset: cannot compute scale bounds without train samples");
    const double margin = 0.05 * (hi - lo);
    b = {lo - margin, hi + margin};
  }

  const DatasetPaths paths = DatasetPaths::in_dir(dir);
  const std::size_t dim = 2ull * cfg.n_p * cfg.n_t;
  std::size_t offset = 0;
  const struct {
    std::size_t count;
    const std::filesystem::path* path;
  } splits[] = {{counts.train, &paths.train}, {counts.val, &paths.val}, {counts.test, &paths.test}};

  for (const auto& split : splits) {
    CsiDataset ds;
    ds.header = {cfg.n_t, cfg.n_c, cfg.n_p, static_cast<uint32_t>(split.count),
                 b.lo,    b.hi,    cfg.master_seed};
    ds.payload.reserve(split.count * dim);
    for (std::size_t i = 0; i < split.count; ++i) {
      const Tensor<double>& t = raw[offset + i];
      for (std::size_t j = 0; j < t.size(); ++j) {
        const double x = t[j];
        if (x < b.lo || x > b.hi) {
          throw RangeError("build_dataset: sample " + std::to_string(offset + i) + " value " +
                           std::to_string(x) + " outside scale bounds [" + std::to_string(b.lo) +
                           ", " + std::to_string(b.hi) + "]");
        }
        ds.payload.push_back(static_cast<float>(apply_scale(x, b)));
      }
    }
    ds.save(*split.path);
    offset += split.count;
  }
  return paths;
}

}  // namespace csidn
