// SPDX-License-Identifier: Apache-2.0

/**
 * @file evaluate.hpp
 * @brief SNR sweep evaluation of a trained bundle and machine-readable
 *        metric reports.
 *
 * Noise in evaluation is seeded per (record, sample index), so results are
 * independent of the evaluation batch size and reproducible under a fixed
 * evaluation seed.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csidn/bundle.hpp"
#include "csidn/channel.hpp"
#include "csidn/checkpoint.hpp"
#include "csidn/codeword.hpp"
#include "csidn/dataset.hpp"
#include "csidn/metrics.hpp"

namespace csidn {

enum class ReferenceMode { truncated, full };

inline const char* reference_mode_name(ReferenceMode m) {
  return m == ReferenceMode::truncated ? "truncated-reference" : "full-reference";
}

inline ReferenceMode reference_mode_from_name(const std::string& s) {
  if (s == "truncated" || s == "truncated-reference") return ReferenceMode::truncated;
  if (s == "full" || s == "full-reference") return ReferenceMode::full;
  throw ConfigError("unknown reference mode '" + s + "' (use truncated or full)");
}

struct EvalSettings {
  std::optional<double> snr_db;  // absent = noise-free
  bool use_dnnet = true;
  uint64_t noise_seed = 0;
  std::size_t batch_size = 100;
};

struct EvalResult {
  double nmse_db = 0.0;
  double rho = 0.0;
  std::size_t samples = 0;
  std::size_t skipped = 0;
};

/// One inference pass: encode, normalize, optional per-sample noise,
/// optional denoise, decode. Returns the reconstructed scaled tensors.
template <typename T>
Tensor<T> bundle_reconstruct(ModelBundle<T>& bundle, const Tensor<T>& batch,
                             const EvalSettings& s, std::size_t first_global_index) {
  Tensor<T> cw = bundle.encoder.forward(batch, Mode::infer);
  const std::size_t b_n = cw.dim(0), n = cw.dim(1);
  for (std::size_t b = 0; b < b_n; ++b) {
    T* row = cw.data() + b * n;
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm_sq += static_cast<double>(row[i]) * row[i];
    if (norm_sq <= 0.0) {
      throw DegenerateError("evaluate: zero-norm codeword for sample " +
                            std::to_string(first_global_index + b));
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(norm_sq));
    for (std::size_t i = 0; i < n; ++i) row[i] *= inv;
  }
  if (s.snr_db.has_value()) {
    const double sigma = std::sqrt(snr_to_sigma_sq(*s.snr_db, n));
    for (std::size_t b = 0; b < b_n; ++b) {
      Rng rng(seed_mix(s.noise_seed, first_global_index + b));
      T* row = cw.data() + b * n;
      for (std::size_t i = 0; i < n; ++i) row[i] += static_cast<T>(sigma * rng.gaussian());
    }
  }
  Tensor<T> shat = s.use_dnnet ? bundle.dnnet.denoise(cw, Mode::infer) : std::move(cw);
  return bundle.decoder.forward(shat, Mode::infer);
}

template <typename T>
Tensor<T> slice_sample(const Tensor<T>& batch, std::size_t i) {
  const std::size_t d = batch.size() / batch.dim(0);
  std::vector<T> v(batch.data() + i * d, batch.data() + (i + 1) * d);
  Shape dims(batch.shape().begin() + 1, batch.shape().end());
  return Tensor<T>::from(dims, std::move(v));
}

// Per-sample reference channels, computed once and reused across SNR
// points and training epochs.
struct ReferenceSet {
  std::vector<CMat> mats;

  static ReferenceSet build(const CsiDataset& ds, const DftPair& dft, ReferenceMode reference,
                            const ChannelConfig* regen_cfg, std::size_t sample_index_offset) {
    if (reference == ReferenceMode::full && regen_cfg == nullptr) {
      throw ConfigError("evaluate: full-reference mode needs the channel configuration");
    }
    ReferenceSet refs;
    refs.mats.reserve(ds.count());
    for (std::size_t i = 0; i < ds.count(); ++i) {
      if (reference == ReferenceMode::truncated) {
        refs.mats.push_back(inverse_pipeline(ds.sample(i), ds.header.bounds(), dft));
      } else {
        refs.mats.push_back(generate_channel(*regen_cfg, sample_index_offset + i));
      }
    }
    return refs;
  }
};

/// Evaluate any reconstruction function (signature: batch, first global
/// sample index -> reconstructed batch) against the dataset. Pass a
/// prebuilt ReferenceSet to amortize the reference transforms.
template <typename T, typename ReconFn>
EvalResult evaluate_samples(ReconFn&& reconstruct, const CsiDataset& ds, const DftPair& dft,
                            ReferenceMode reference, const ChannelConfig* regen_cfg,
                            std::size_t sample_index_offset, std::size_t batch_size,
                            const ReferenceSet* refs = nullptr) {
  if (reference == ReferenceMode::full && regen_cfg == nullptr && refs == nullptr) {
    throw ConfigError("evaluate: full-reference mode needs the channel configuration");
  }
  if (batch_size == 0) throw ConfigError("evaluate: batch size must be positive");
  if (refs != nullptr && refs->mats.size() != ds.count()) {
    throw DimensionError("evaluate: reference set size " + std::to_string(refs->mats.size()) +
                         " vs dataset count " + std::to_string(ds.count()));
  }
  const ScaleBounds bounds = ds.header.bounds();
  MetricAccumulator acc;
  for (std::size_t start = 0; start < ds.count(); start += batch_size) {
    const std::size_t n = std::min(batch_size, ds.count() - start);
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = start + i;
    Tensor<T> batch;
    ds.gather(indices, batch);
    Tensor<T> recon = reconstruct(batch, sample_index_offset + start);
    for (std::size_t i = 0; i < n; ++i) {
      const CMat h_hat = inverse_pipeline(slice_sample(recon, i), bounds, dft);
      if (refs != nullptr) {
        acc.add(refs->mats[start + i], h_hat);
      } else if (reference == ReferenceMode::truncated) {
        acc.add(inverse_pipeline(ds.sample(start + i), bounds, dft), h_hat);
      } else {
        acc.add(generate_channel(*regen_cfg, sample_index_offset + start + i), h_hat);
      }
    }
  }
  return {acc.nmse_db(), acc.rho(), acc.used(), acc.skipped()};
}

template <typename T>
EvalResult evaluate_reconstruction(ModelBundle<T>& bundle, const CsiDataset& ds,
                                   const EvalSettings& settings, const DftPair& dft,
                                   ReferenceMode reference, const ChannelConfig* regen_cfg,
                                   std::size_t sample_index_offset,
                                   const ReferenceSet* refs = nullptr) {
  auto fn = [&](const Tensor<T>& batch, std::size_t first) {
    return bundle_reconstruct(bundle, batch, settings, first);
  };
  return evaluate_samples<T>(fn, ds, dft, reference, regen_cfg, sample_index_offset,
                             settings.batch_size, refs);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct MetricsRecord {
  double gamma = 0.0;
  std::optional<double> snr_db;  // absent = noise-free pass
  double nmse_db = 0.0;
  double rho = 0.0;
  std::size_t samples = 0;
  std::string reference_mode;
  std::string checkpoint_id;
  uint64_t seed = 0;
};

struct MetricsReport {
  std::vector<MetricsRecord> records;
};

struct SweepOptions {
  std::vector<double> snr_list;
  bool include_noise_free = true;
  bool use_dnnet = true;
  bool noise_free_uses_dnnet = false;  // benchmark pass default: bare autoencoder
  ReferenceMode reference = ReferenceMode::truncated;
  uint64_t eval_seed = 0;
  std::size_t batch_size = 100;
  std::string checkpoint_id;
  uint8_t parts_available = kPartAll;
};

/// Run the SNR sweep (plus a noise-free pass) over the test set.
MetricsReport evaluate_bundle(ModelBundle<float>& bundle, const CsiDataset& test,
                              const SweepOptions& options, const ChannelConfig* regen_cfg,
                              std::size_t sample_index_offset);

/// Records sorted by (gamma, snr_db) with the noise-free pass last.
void sort_report(MetricsReport& report);

/// One comma-separated line per record under a fixed header; the snr_db
/// column holds the literal `inf` for the noise-free pass.
void emit_report_rows(const MetricsReport& report, const std::filesystem::path& path);

/// Per-(gamma, metric) blocks of "snr value" pairs for external plotting.
void emit_report_curves(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace csidn
