// SPDX-License-Identifier: Apache-2.0

/**
 * @file config.hpp
 * @brief Run configuration: one JSON file drives dataset generation, both
 *        training stages and evaluation, so a whole experiment is pinned
 *        by a single document. Unknown keys are rejected.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csidn/autoencoder.hpp"
#include "csidn/channel.hpp"
#include "csidn/dataset.hpp"
#include "csidn/dnnet.hpp"
#include "csidn/evaluate.hpp"
#include "csidn/train.hpp"

namespace csidn {

struct RunConfig {
  uint64_t master_seed = 1;

  ChannelConfig channel;
  SplitCounts counts{2000, 500, 500};
  std::optional<ScaleBounds> scale_bounds;

  std::vector<std::size_t> codeword_lengths{256};
  DnnetSpec dnnet_template;  // n_cw is filled per codeword length
  TrainConfig training;

  std::vector<double> snr_list{0.0, 10.0, 20.0, 30.0};
  bool include_noise_free = true;
  bool noise_free_uses_dnnet = false;
  ReferenceMode reference_mode = ReferenceMode::truncated;
  uint64_t eval_seed = 0;  // 0 = derive from master_seed
  std::size_t eval_batch_size = 100;

  std::filesystem::path data_dir = "data";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path report_dir = "reports";

  static RunConfig load(const std::filesystem::path& path);

  void validate() const;

  AutoencoderSpec autoencoder_spec(std::size_t n_cw) const {
    return {channel.n_p, channel.n_t, n_cw};
  }
  DnnetSpec dnnet_spec(std::size_t n_cw) const {
    DnnetSpec s = dnnet_template;
    s.n_cw = n_cw;
    return s;
  }
  uint64_t effective_eval_seed() const {
    return eval_seed != 0 ? eval_seed : seed_mix(master_seed, seed_tag("eval-seed"));
  }
};

}  // namespace csidn
