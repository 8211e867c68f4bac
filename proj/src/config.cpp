// SPDX-License-Identifier: Apache-2.0
#include "csidn/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace csidn {

namespace {

using nlohmann::json;

// Tracks which keys of one JSON object were consumed; anything left over
// is a configuration error.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      throw ConfigError("config section '" + name_ + "' is missing required key '" + key + "'");
    }
    return read<T>(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return read<T>(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (seen_.find(item.key()) == seen_.end()) {
        throw ConfigError("unknown key '" + item.key() + "' in config section '" + name_ + "'");
      }
    }
  }

 private:
  template <typename T>
  T read(const std::string& key) {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type: " + e.what());
    }
  }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  json root;
  try {
    root = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }

  RunConfig cfg;
  Section top(root, "(top level)");
  cfg.master_seed = top.get<uint64_t>("master_seed", 1);

  if (top.has("channel")) {
    Section s(top.raw("channel"), "channel");
    cfg.channel.n_t = s.get<uint32_t>("n_t", cfg.channel.n_t);
    cfg.channel.n_c = s.get<uint32_t>("n_c", cfg.channel.n_c);
    cfg.channel.n_p = s.get<uint32_t>("n_p", cfg.channel.n_p);
    cfg.channel.num_paths = s.get<uint32_t>("num_paths", cfg.channel.num_paths);
    cfg.channel.delay_spread_rows = s.get<double>("delay_spread_rows", cfg.channel.delay_spread_rows);
    s.finish();
  }
  cfg.channel.master_seed = cfg.master_seed;

  if (top.has("dataset")) {
    Section s(top.raw("dataset"), "dataset");
    cfg.counts.train = s.get<std::size_t>("train_samples", cfg.counts.train);
    cfg.counts.val = s.get<std::size_t>("val_samples", cfg.counts.val);
    cfg.counts.test = s.get<std::size_t>("test_samples", cfg.counts.test);
    if (s.has("scale_bounds")) {
      Section b(s.raw("scale_bounds"), "dataset.scale_bounds");
      ScaleBounds bounds;
      bounds.lo = b.require<double>("min");
      bounds.hi = b.require<double>("max");
      b.finish();
      cfg.scale_bounds = bounds;
    }
    s.finish();
  }

  if (top.has("autoencoder")) {
    Section s(top.raw("autoencoder"), "autoencoder");
    cfg.codeword_lengths = s.get<std::vector<std::size_t>>("codeword_lengths", cfg.codeword_lengths);
    s.finish();
  }

  if (top.has("dnnet")) {
    Section s(top.raw("dnnet"), "dnnet");
    cfg.dnnet_template.total_layers = s.get<std::size_t>("total_layers", cfg.dnnet_template.total_layers);
    cfg.dnnet_template.hidden_width = s.get<std::size_t>("hidden_width", cfg.dnnet_template.hidden_width);
    cfg.dnnet_template.beta = s.get<double>("beta", cfg.dnnet_template.beta);
    cfg.dnnet_template.lambda_kl = s.get<double>("lambda_kl", cfg.dnnet_template.lambda_kl);
    s.finish();
  }

  if (top.has("training")) {
    Section s(top.raw("training"), "training");
    cfg.training.learning_rate = s.get<double>("learning_rate", cfg.training.learning_rate);
    cfg.training.batch_size = s.get<std::size_t>("batch_size", cfg.training.batch_size);
    cfg.training.pretrain_epochs_ae =
        s.get<std::size_t>("pretrain_epochs_ae", cfg.training.pretrain_epochs_ae);
    cfg.training.pretrain_epochs_dn =
        s.get<std::size_t>("pretrain_epochs_dn", cfg.training.pretrain_epochs_dn);
    cfg.training.joint_epochs = s.get<std::size_t>("joint_epochs", cfg.training.joint_epochs);
    cfg.training.alternation_period_epochs =
        s.get<std::size_t>("alternation_period_epochs", cfg.training.alternation_period_epochs);
    cfg.training.snr_db = s.get<double>("snr_db", cfg.training.snr_db);
    if (s.has("snr_range_db")) {
      const auto range = s.raw("snr_range_db").get<std::vector<double>>();
      if (range.size() != 2) {
        throw ConfigError("training.snr_range_db must be [low, high]");
      }
      cfg.training.snr_range_db = {range[0], range[1]};
    }
    cfg.training.precision = precision_from_name(s.get<std::string>("precision", "f32"));
    s.finish();
  }
  cfg.training.master_seed = cfg.master_seed;

  if (top.has("evaluation")) {
    Section s(top.raw("evaluation"), "evaluation");
    cfg.snr_list = s.get<std::vector<double>>("snr_list", cfg.snr_list);
    cfg.include_noise_free = s.get<bool>("include_noise_free", cfg.include_noise_free);
    cfg.noise_free_uses_dnnet = s.get<bool>("noise_free_uses_dnnet", cfg.noise_free_uses_dnnet);
    cfg.reference_mode =
        reference_mode_from_name(s.get<std::string>("reference_mode", "truncated"));
    cfg.eval_seed = s.get<uint64_t>("eval_seed", cfg.eval_seed);
    cfg.eval_batch_size = s.get<std::size_t>("batch_size", cfg.eval_batch_size);
    s.finish();
  }
  cfg.training.eval_batch_size = cfg.eval_batch_size;

  if (top.has("paths")) {
    Section s(top.raw("paths"), "paths");
    cfg.data_dir = s.get<std::string>("data_dir", cfg.data_dir.string());
    cfg.checkpoint_dir = s.get<std::string>("checkpoint_dir", cfg.checkpoint_dir.string());
    cfg.report_dir = s.get<std::string>("report_dir", cfg.report_dir.string());
    s.finish();
  }
  top.finish();

  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  channel.validate();
  if (codeword_lengths.empty()) {
    throw ConfigError("autoencoder.codeword_lengths must list at least one length");
  }
  for (std::size_t n_cw : codeword_lengths) {
    autoencoder_spec(n_cw).validate();
    dnnet_spec(n_cw).validate();
  }
  training.validate();
  if (scale_bounds && !(scale_bounds->hi > scale_bounds->lo)) {
    throw ConfigError("dataset.scale_bounds.max must exceed dataset.scale_bounds.min");
  }
  if (!scale_bounds && counts.train == 0) {
    throw ConfigError("dataset: computed scale bounds need train_samples >= 1");
  }
  if (snr_list.empty() && !include_noise_free) {
    throw ConfigError("evaluation: empty snr_list with include_noise_free=false evaluates nothing");
  }
  if (eval_batch_size == 0) throw ConfigError("evaluation.batch_size must be positive");
}

}  // namespace csidn
