// SPDX-License-Identifier: Apache-2.0

/**
 * @file checkpoint.hpp
 * @brief Model checkpoint files ("CSICKPT").
 *
 * Layout, little-endian: magic "CSICKPT", u16 version = 1, u8 part mask
 * (bit 0 encoder, bit 1 decoder, bit 2 denoiser), then for each present
 * part in that order: u32 layer count and per layer its kind, geometry and
 * f32 parameter payload; finally a u64 training-step counter. A file is
 * parsed and validated in full before any network is touched, so a bad
 * file never leaves partial state behind.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "csidn/bundle.hpp"
#include "csidn/layer.hpp"

namespace csidn {

inline constexpr char kCheckpointMagic[7] = {'C', 'S', 'I', 'C', 'K', 'P', 'T'};
inline constexpr uint16_t kCheckpointVersion = 1;

enum PartMask : uint8_t {
  kPartEncoder = 1,
  kPartDecoder = 2,
  kPartDnnet = 4,
  kPartAutoencoder = kPartEncoder | kPartDecoder,
  kPartAll = kPartEncoder | kPartDecoder | kPartDnnet,
};

struct CheckpointData {
  uint8_t mask = 0;
  std::vector<std::vector<LayerBlob>> parts;  // one entry per set mask bit, encoder->decoder->dnnet
  uint64_t train_step = 0;
};

void write_checkpoint_file(const CheckpointData& data, const std::filesystem::path& path);
CheckpointData read_checkpoint_file(const std::filesystem::path& path);

template <typename T>
void save_checkpoint(const ModelBundle<T>& bundle, uint8_t mask,
                     const std::filesystem::path& path) {
  if (mask == 0 || mask > kPartAll) {
    throw ConfigError("save_checkpoint: invalid part mask " + std::to_string(mask));
  }
  CheckpointData data;
  data.mask = mask;
  data.train_step = bundle.train_step;
  if (mask & kPartEncoder) data.parts.push_back(bundle.encoder.export_blobs());
  if (mask & kPartDecoder) data.parts.push_back(bundle.decoder.export_blobs());
  if (mask & kPartDnnet) data.parts.push_back(bundle.dnnet.export_blobs());
  write_checkpoint_file(data, path);
}

/// Loads the parts present in the file into the bundle, leaving absent
/// parts untouched. Returns the file's part mask.
template <typename T>
uint8_t load_checkpoint(const std::filesystem::path& path, ModelBundle<T>& bundle) {
  const CheckpointData data = read_checkpoint_file(path);
  std::size_t i = 0;
  if (data.mask & kPartEncoder) bundle.encoder.import_blobs(data.parts.at(i++));
  if (data.mask & kPartDecoder) bundle.decoder.import_blobs(data.parts.at(i++));
  if (data.mask & kPartDnnet) bundle.dnnet.import_blobs(data.parts.at(i++));
  bundle.train_step = data.train_step;
  return data.mask;
}

}  // namespace csidn
