// SPDX-License-Identifier: Apache-2.0
#include "csidn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "csidn/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

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
  if (!is) throw FormatError("checkpoint truncated: " + path.string());
  return v;
}

void write_dims(std::ostream& os, const Shape& dims) {
  write_pod(os, static_cast<uint32_t>(dims.size()));
  for (std::size_t d : dims) write_pod(os, static_cast<uint32_t>(d));
}

Shape read_dims(std::istream& is, const std::filesystem::path& path) {
  const auto n = read_pod<uint32_t>(is, path);
  if (n > 8) throw FormatError("checkpoint layer rank " + std::to_string(n) + " implausible: " +
                               path.string());
  Shape dims(n);
  for (auto& d : dims) d = read_pod<uint32_t>(is, path);
  return dims;
}

void write_layer(std::ostream& os, const LayerBlob& blob) {
  write_pod(os, static_cast<uint8_t>(blob.spec.kind));
  write_pod(os, static_cast<uint8_t>(blob.spec.act));
  write_pod(os, static_cast<uint32_t>(blob.spec.kernel));
  write_pod(os, static_cast<uint32_t>(blob.spec.in_channels));
  write_pod(os, static_cast<uint32_t>(blob.spec.out_channels));
  write_dims(os, blob.spec.input_dims);
  write_dims(os, blob.spec.output_dims);
  write_pod(os, static_cast<uint64_t>(blob.payload.size()));
  os.write(reinterpret_cast<const char*>(blob.payload.data()),
           static_cast<std::streamsize>(blob.payload.size() * sizeof(float)));
}

LayerBlob read_layer(std::istream& is, const std::filesystem::path& path) {
  LayerBlob blob;
  const auto kind = read_pod<uint8_t>(is, path);
  if (kind > static_cast<uint8_t>(LayerKind::reshape)) {
    throw FormatError("checkpoint has unknown layer kind " + std::to_string(kind) + ": " +
                      path.string());
  }
  blob.spec.kind = static_cast<LayerKind>(kind);
  blob.spec.act = static_cast<ActKind>(read_pod<uint8_t>(is, path));
  blob.spec.kernel = read_pod<uint32_t>(is, path);
  blob.spec.in_channels = read_pod<uint32_t>(is, path);
  blob.spec.out_channels = read_pod<uint32_t>(is, path);
  blob.spec.input_dims = read_dims(is, path);
  blob.spec.output_dims = read_dims(is, path);
  const auto payload_len = read_pod<uint64_t>(is, path);
  if (payload_len > (1ull << 32)) {
    throw FormatError("checkpoint layer payload implausibly large: " + path.string());
  }
  blob.payload.resize(payload_len);
  is.read(reinterpret_cast<char*>(blob.payload.data()),
          static_cast<std::streamsize>(payload_len * sizeof(float)));
  if (!is) throw FormatError("checkpoint payload truncated: " + path.string());
  return blob;
}

}  // namespace

void write_checkpoint_file(const CheckpointData& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(os, kCheckpointVersion);
  write_pod(os, data.mask);
  for (const auto& part : data.parts) {
    write_pod(os, static_cast<uint32_t>(part.size()));
    for (const LayerBlob& blob : part) write_layer(os, blob);
  }
  write_pod(os, data.train_step);
  if (!os) throw IoError("write failed for checkpoint: " + path.string());
}

CheckpointData read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("bad checkpoint magic: " + path.string());
  }
  const auto version = read_pod<uint16_t>(is, path);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + ": " +
                      path.string());
  }
  CheckpointData data;
  data.mask = read_pod<uint8_t>(is, path);
  if (data.mask == 0 || data.mask > kPartAll) {
    throw FormatError("invalid checkpoint part mask " + std::to_string(data.mask) + ": " +
                      path.string());
  }
  int part_count = 0;
  for (uint8_t bit : {kPartEncoder, kPartDecoder, kPartDnnet}) {
    if (data.mask & bit) ++part_count;
  }
  for (int p = 0; p < part_count; ++p) {
    const auto layer_count = read_pod<uint32_t>(is, path);
    if (layer_count > 1024) {
      throw FormatError("checkpoint layer count implausible: " + path.string());
    }
    std::vector<LayerBlob> part;
    part.reserve(layer_count);
    for (uint32_t l = 0; l < layer_count; ++l) part.push_back(read_layer(is, path));
    data.parts.push_back(std::move(part));
  }
  data.train_step = read_pod<uint64_t>(is, path);
  return data;
}

}  // namespace csidn
