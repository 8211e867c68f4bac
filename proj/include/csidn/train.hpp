// SPDX-License-Identifier: Apache-2.0

/**
 * @file train.hpp
 * @brief Two-stage training: separate pre-training of the autoencoder and
 *        the denoiser, then joint training with an in-line noise layer and
 *        alternating parameter freezing.
 *
 * Every stage tracks validation NMSE per epoch (plus the initial state)
 * and ends by restoring the best-validation parameters. All randomness is
 * derived from the master seed, so a repeated run on the same build
 * reproduces loss traces exactly.
 */

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csidn/adam.hpp"
#include "csidn/bundle.hpp"
#include "csidn/codeword.hpp"
#include "csidn/dataset.hpp"
#include "csidn/evaluate.hpp"
#include "csidn/loss.hpp"
#include "csidn/rng.hpp"

namespace csidn {

enum class Precision { f32, f64 };

inline Precision precision_from_name(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("unknown precision '" + s + "' (use f32 or f64)");
}

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 200;
  std::size_t pretrain_epochs_ae = 100;
  std::size_t pretrain_epochs_dn = 100;
  std::size_t joint_epochs = 50;
  std::size_t alternation_period_epochs = 1;
  double snr_db = 10.0;
  std::optional<std::pair<double, double>> snr_range_db;  // mixed-SNR training
  uint64_t master_seed = 1;
  Precision precision = Precision::f32;
  std::size_t eval_batch_size = 100;

  void validate() const {
    if (learning_rate <= 0.0) throw ConfigError("training: learning_rate must be positive");
    if (batch_size < 2) {
      throw ConfigError("training: batch_size must be >= 2 (batch normalization), got " +
                        std::to_string(batch_size));
    }
    if (alternation_period_epochs == 0) {
      throw ConfigError("training: alternation_period_epochs must be >= 1");
    }
    if (snr_range_db && snr_range_db->second < snr_range_db->first) {
      throw ConfigError("training: snr_range_db upper bound below lower bound");
    }
  }
};

struct StageResult {
  double final_train_loss = 0.0;
  double best_val_nmse_db = 0.0;
  std::size_t epochs_run = 0;
  double wall_time_s = 0.0;
  std::string checkpoint_path;
  std::vector<double> loss_trace;      // one entry per epoch
  std::vector<double> val_nmse_trace;  // epochs + 1 entries; index 0 is the inherited state
};

/// Validation noise is drawn from this fixed stream in every stage, so the
/// first joint validation reproduces the pre-trained bundle's score.
inline uint64_t validation_noise_seed(uint64_t master_seed) {
  return seed_mix(master_seed, seed_tag("val-noise"));
}

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

inline double batch_snr_db(const TrainConfig& cfg, uint64_t epoch, uint64_t batch) {
  if (!cfg.snr_range_db) return cfg.snr_db;
  Rng rng(seed_mix(cfg.master_seed, seed_tag("snr-draw"), epoch, batch));
  return rng.uniform(cfg.snr_range_db->first, cfg.snr_range_db->second);
}

template <typename T>
double validation_nmse(ModelBundle<T>& bundle, const CsiDataset& val,
                       std::optional<double> snr_db, bool use_dnnet, const TrainConfig& cfg,
                       const DftPair& dft, const ReferenceSet& refs) {
  EvalSettings s;
  s.snr_db = snr_db;
  s.use_dnnet = use_dnnet;
  s.noise_seed = validation_noise_seed(cfg.master_seed);
  s.batch_size = cfg.eval_batch_size;
  return evaluate_reconstruction(bundle, val, s, dft, ReferenceMode::truncated, nullptr, 0, &refs)
      .nmse_db;
}

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Stage 1a: train encoder+decoder on clean reconstruction (no noise, no
/// denoiser). The bundle ends at its best-validation parameters.
template <typename T>
StageResult pretrain_autoencoder(ModelBundle<T>& bundle, const CsiDataset& train,
                                 const CsiDataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.header.n_p != bundle.ae_spec.n_p || train.header.n_t != bundle.ae_spec.n_t) {
    throw DimensionError("pretrain_autoencoder: dataset geometry " +
                         std::to_string(train.header.n_p) + "x" +
                         std::to_string(train.header.n_t) + " vs bundle " +
                         std::to_string(bundle.ae_spec.n_p) + "x" +
                         std::to_string(bundle.ae_spec.n_t));
  }
  detail::StageTimer timer;
  const DftPair dft = DftPair::for_dims(val.header.n_c, val.header.n_t);
  const ReferenceSet val_refs =
      ReferenceSet::build(val, dft, ReferenceMode::truncated, nullptr, 0);
  bundle.set_autoencoder_frozen(false);
  bundle.set_dnnet_frozen(false);

  AdamOptimizer<T> opt_en(bundle.encoder.param_group(), static_cast<T>(cfg.learning_rate));
  AdamOptimizer<T> opt_de(bundle.decoder.param_group(), static_cast<T>(cfg.learning_rate));
  NormalizeLayer<T> norm;

  StageResult result;
  double best = detail::validation_nmse(bundle, val, std::nullopt, false, cfg, dft, val_refs);
  result.val_nmse_trace.push_back(best);
  Encoder<T> best_encoder = bundle.encoder;
  Decoder<T> best_decoder = bundle.decoder;

  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs_ae; ++epoch) {
    const auto order = detail::shuffled_indices(
        train.count(), seed_mix(cfg.master_seed, seed_tag("shuffle-ae"), epoch));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      if (n < 2) break;
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + n);
      Tensor<T> h;
      train.gather(idx, h);

      bundle.encoder.zero_grad();
      bundle.decoder.zero_grad();
      Tensor<T> s = bundle.encoder.forward(h, Mode::train);
      Tensor<T> sn = norm.forward(s);
      Tensor<T> recon = bundle.decoder.forward(sn, Mode::train);
      epoch_loss += mse_loss(recon, h);
      ++batches;

      Tensor<T> d = mse_loss_grad(recon, h);
      d = bundle.decoder.backward(d);
      d = norm.backward(d);
      bundle.encoder.backward(d);
      opt_en.step();
      opt_de.step();
    }
    result.loss_trace.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);

    const double v =
        detail::validation_nmse(bundle, val, std::nullopt, false, cfg, dft, val_refs);
    result.val_nmse_trace.push_back(v);
    if (v < best) {
      best = v;
      best_encoder = bundle.encoder;
      best_decoder = bundle.decoder;
    }
  }

  bundle.encoder = best_encoder;
  bundle.decoder = best_decoder;
  bundle.train_step += opt_en.steps() + opt_de.steps();
  result.epochs_run = cfg.pretrain_epochs_ae;
  result.final_train_loss = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  result.best_val_nmse_db = best;
  result.wall_time_s = timer.seconds();
  return result;
}

template <typename T>
struct CodewordPairs {
  Tensor<T> noisy;  // {count, n_cw}
  Tensor<T> clean;
};

/// Encode every dataset sample with the (trained) encoder, normalize, and
/// superimpose link noise: the denoiser's supervised training pairs. With
/// `snr_range_db` set (mixed-SNR training) each sample draws its own SNR
/// uniformly from the range instead of using `noise`.
template <typename T>
CodewordPairs<T> generate_dnnet_dataset(ModelBundle<T>& bundle, const CsiDataset& ds,
                                        const NoiseModel& noise, Rng& rng,
                                        std::size_t batch_size = 200,
                                        std::optional<std::pair<double, double>> snr_range_db = {}) {
  const std::size_t n_cw = bundle.ae_spec.n_cw;
  CodewordPairs<T> pairs;
  pairs.clean = Tensor<T>({ds.count(), n_cw});
  pairs.noisy = Tensor<T>({ds.count(), n_cw});
  NormalizeLayer<T> norm;
  const double fixed_sigma = std::sqrt(noise.sigma_sq);

  for (std::size_t start = 0; start < ds.count(); start += batch_size) {
    const std::size_t n = std::min(batch_size, ds.count() - start);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
    Tensor<T> h;
    ds.gather(idx, h);
    Tensor<T> s = norm.forward(bundle.encoder.forward(h, Mode::infer));
    for (std::size_t i = 0; i < n; ++i) {
      double sigma = fixed_sigma;
      if (snr_range_db) {
        sigma = std::sqrt(
            snr_to_sigma_sq(rng.uniform(snr_range_db->first, snr_range_db->second), n_cw));
      }
      T* clean_row = pairs.clean.data() + (start + i) * n_cw;
      T* noisy_row = pairs.noisy.data() + (start + i) * n_cw;
      const T* src = s.data() + i * n_cw;
      for (std::size_t j = 0; j < n_cw; ++j) {
        clean_row[j] = src[j];
        noisy_row[j] = src[j] + static_cast<T>(sigma * rng.gaussian());
      }
    }
  }
  return pairs;
}

/// Stage 1b: train the denoiser on (noisy, clean) codeword pairs with the
/// KL sparsity penalty. Validation runs the full pipeline at the training
/// SNR. The autoencoder is untouched.
template <typename T>
StageResult pretrain_dnnet(ModelBundle<T>& bundle, const CodewordPairs<T>& pairs,
                           const CsiDataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.clean.dim(1) != bundle.dn_spec.n_cw) {
    throw DimensionError("pretrain_dnnet: pair width " + std::to_string(pairs.clean.dim(1)) +
                         " vs codeword length " + std::to_string(bundle.dn_spec.n_cw));
  }
  detail::StageTimer timer;
  const DftPair dft = DftPair::for_dims(val.header.n_c, val.header.n_t);
  const ReferenceSet val_refs =
      ReferenceSet::build(val, dft, ReferenceMode::truncated, nullptr, 0);
  bundle.set_dnnet_frozen(false);

  AdamOptimizer<T> opt_dn(bundle.dnnet.param_group(), static_cast<T>(cfg.learning_rate));
  const std::size_t count = pairs.clean.dim(0), n_cw = pairs.clean.dim(1);

  StageResult result;
  double best = detail::validation_nmse(bundle, val, cfg.snr_db, true, cfg, dft, val_refs);
  result.val_nmse_trace.push_back(best);
  Dnnet<T> best_dnnet = bundle.dnnet;

  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs_dn; ++epoch) {
    const auto order = detail::shuffled_indices(
        count, seed_mix(cfg.master_seed, seed_tag("shuffle-dn"), epoch));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      if (n < 2) break;
      Tensor<T> noisy({n, n_cw}), clean({n, n_cw});
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(pairs.noisy.data() + src * n_cw, n_cw, noisy.data() + i * n_cw);
        std::copy_n(pairs.clean.data() + src * n_cw, n_cw, clean.data() + i * n_cw);
      }

      bundle.dnnet.zero_grad();
      Tensor<T> shat = bundle.dnnet.denoise(noisy, Mode::train);
      epoch_loss += mse_loss(shat, clean) +
                    bundle.dn_spec.lambda_kl * bundle.dnnet.kl_penalty();
      ++batches;
      bundle.dnnet.backward(mse_loss_grad(shat, clean), true);
      opt_dn.step();
    }
    result.loss_trace.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);

    const double v = detail::validation_nmse(bundle, val, cfg.snr_db, true, cfg, dft, val_refs);
    result.val_nmse_trace.push_back(v);
    if (v < best) {
      best = v;
      best_dnnet = bundle.dnnet;
    }
  }

  bundle.dnnet = best_dnnet;
  bundle.train_step += opt_dn.steps();
  result.epochs_run = cfg.pretrain_epochs_dn;
  result.final_train_loss = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  result.best_val_nmse_db = best;
  result.wall_time_s = timer.seconds();
  return result;
}

/// Stage 2: joint training of the connected pipeline with a noise layer
/// between the encoder and the denoiser. Epochs alternate between training
/// the denoiser (autoencoder frozen) and the autoencoder (denoiser
/// frozen), starting with the denoiser; the period is configurable. Noise
/// is drawn fresh per (epoch, batch).
template <typename T>
StageResult joint_train(ModelBundle<T>& bundle, const CsiDataset& train, const CsiDataset& val,
                        const TrainConfig& cfg) {
  cfg.validate();
  detail::StageTimer timer;
  const DftPair dft = DftPair::for_dims(val.header.n_c, val.header.n_t);
  const ReferenceSet val_refs =
      ReferenceSet::build(val, dft, ReferenceMode::truncated, nullptr, 0);
  const std::size_t n_cw = bundle.ae_spec.n_cw;

  AdamOptimizer<T> opt_en(bundle.encoder.param_group(), static_cast<T>(cfg.learning_rate));
  AdamOptimizer<T> opt_de(bundle.decoder.param_group(), static_cast<T>(cfg.learning_rate));
  AdamOptimizer<T> opt_dn(bundle.dnnet.param_group(), static_cast<T>(cfg.learning_rate));
  NormalizeLayer<T> norm;

  StageResult result;
  double best = detail::validation_nmse(bundle, val, cfg.snr_db, true, cfg, dft, val_refs);
  result.val_nmse_trace.push_back(best);
  ModelBundle<T> best_bundle = bundle;

  for (std::size_t epoch = 0; epoch < cfg.joint_epochs; ++epoch) {
    const bool dnnet_active = (epoch / cfg.alternation_period_epochs) % 2 == 0;
    bundle.set_autoencoder_frozen(dnnet_active);
    bundle.set_dnnet_frozen(!dnnet_active);

    const auto order = detail::shuffled_indices(
        train.count(), seed_mix(cfg.master_seed, seed_tag("shuffle-joint"), epoch));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      if (n < 2) break;
      const std::size_t batch_index = start / cfg.batch_size;
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + n);
      Tensor<T> h;
      train.gather(idx, h);

      bundle.zero_grad();
      Tensor<T> s = bundle.encoder.forward(h, Mode::train);
      Tensor<T> sn = norm.forward(s);
      // Noise layer: the denoiser's stream of training pairs, generated in
      // line, fresh every batch.
      Rng noise_rng(seed_mix(cfg.master_seed, seed_tag("joint-noise"), epoch, batch_index));
      const double sigma =
          std::sqrt(snr_to_sigma_sq(detail::batch_snr_db(cfg, epoch, batch_index), n_cw));
      for (std::size_t i = 0; i < sn.size(); ++i) {
        sn[i] += static_cast<T>(sigma * noise_rng.gaussian());
      }
      Tensor<T> shat = bundle.dnnet.denoise(sn, Mode::train);
      Tensor<T> recon = bundle.decoder.forward(shat, Mode::train);

      double batch_loss = mse_loss(recon, h);
      if (dnnet_active) batch_loss += bundle.dn_spec.lambda_kl * bundle.dnnet.kl_penalty();
      epoch_loss += batch_loss;
      ++batches;

      Tensor<T> d = mse_loss_grad(recon, h);
      d = bundle.decoder.backward(d);
      d = bundle.dnnet.backward(d, dnnet_active);
      d = norm.backward(d);
      bundle.encoder.backward(d);
      opt_en.step();
      opt_de.step();
      opt_dn.step();
    }
    result.loss_trace.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);

    const double v = detail::validation_nmse(bundle, val, cfg.snr_db, true, cfg, dft, val_refs);
    result.val_nmse_trace.push_back(v);
    if (v < best) {
      best = v;
      best_bundle = bundle;
    }
  }

  const uint64_t steps = opt_en.steps() + opt_de.steps() + opt_dn.steps();
  bundle = best_bundle;
  bundle.set_autoencoder_frozen(false);
  bundle.set_dnnet_frozen(false);
  bundle.train_step += steps;
  result.epochs_run = cfg.joint_epochs;
  result.final_train_loss = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  result.best_val_nmse_db = best;
  result.wall_time_s = timer.seconds();
  return result;
}

}  // namespace csidn
