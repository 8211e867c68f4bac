// SPDX-License-Identifier: Apache-2.0
#include "csidn/cli.hpp"

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "csidn/checkpoint.hpp"
#include "csidn/config.hpp"
#include "csidn/train.hpp"

namespace csidn {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path ae_checkpoint_path(const RunConfig& cfg, std::size_t n_cw) {
  return cfg.checkpoint_dir / ("pretrain_ae_cw" + std::to_string(n_cw) + ".ckpt");
}
fs::path dn_checkpoint_path(const RunConfig& cfg, std::size_t n_cw) {
  return cfg.checkpoint_dir / ("pretrain_dn_cw" + std::to_string(n_cw) + ".ckpt");
}
fs::path joint_checkpoint_path(const RunConfig& cfg, std::size_t n_cw) {
  return cfg.checkpoint_dir / ("joint_cw" + std::to_string(n_cw) + ".ckpt");
}

CsiDataset load_split(const RunConfig& cfg, const char* name) {
  const fs::path path = cfg.data_dir / (std::string(name) + ".csid");
  if (!fs::exists(path)) {
    throw StateError("dataset split '" + std::string(name) + "' not found at " + path.string() +
                     "; run the generate command first");
  }
  CsiDataset ds = CsiDataset::load(path);
  if (ds.header.n_t != cfg.channel.n_t || ds.header.n_c != cfg.channel.n_c ||
      ds.header.n_p != cfg.channel.n_p) {
    throw DimensionError("dataset " + path.string() + " geometry (n_t=" +
                         std::to_string(ds.header.n_t) + ", n_c=" + std::to_string(ds.header.n_c) +
                         ", n_p=" + std::to_string(ds.header.n_p) +
                         ") does not match the config's channel section");
  }
  if (ds.header.master_seed != cfg.master_seed) {
    throw ConfigError("dataset " + path.string() + " was generated with master_seed " +
                      std::to_string(ds.header.master_seed) + ", config says " +
                      std::to_string(cfg.master_seed));
  }
  return ds;
}

void require_checkpoint(const fs::path& path, const char* stage) {
  if (!fs::exists(path)) {
    throw StateError("missing checkpoint " + path.string() + "; run --stage " +
                     std::string(stage) + " first");
  }
}

void write_manifest(const RunConfig& cfg, std::size_t n_cw, const char* stage,
                    const StageResult& result) {
  json m;
  m["stage"] = stage;
  m["n_cw"] = n_cw;
  m["gamma"] = cfg.autoencoder_spec(n_cw).gamma();
  m["master_seed"] = cfg.master_seed;
  m["learning_rate"] = cfg.training.learning_rate;
  m["batch_size"] = cfg.training.batch_size;
  m["snr_db"] = cfg.training.snr_db;
  if (cfg.training.snr_range_db) {
    m["snr_range_db"] = {cfg.training.snr_range_db->first, cfg.training.snr_range_db->second};
  }
  m["epochs_run"] = result.epochs_run;
  m["final_train_loss"] = result.final_train_loss;
  m["best_val_nmse_db"] = result.best_val_nmse_db;
  m["wall_time_s"] = result.wall_time_s;
  m["checkpoint"] = result.checkpoint_path;
  m["loss_trace"] = result.loss_trace;
  m["val_nmse_trace"] = result.val_nmse_trace;

  const fs::path path =
      cfg.checkpoint_dir /
      ("manifest_" + std::string(stage) + "_cw" + std::to_string(n_cw) + ".json");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest: " + path.string());
  os << m.dump(2) << "\n";
}

int cmd_generate(const fs::path& config_path) {
  const RunConfig cfg = RunConfig::load(config_path);
  const DatasetPaths paths = build_dataset(cfg.channel, cfg.counts, cfg.scale_bounds, cfg.data_dir);
  const CsiDataset train = CsiDataset::load(paths.train);
  std::printf("generated datasets under %s\n", cfg.data_dir.string().c_str());
  std::printf("  geometry: n_t=%u n_c=%u n_p=%u, num_paths=%u\n", train.header.n_t,
              train.header.n_c, train.header.n_p, cfg.channel.num_paths);
  std::printf("  samples: train=%zu val=%zu test=%zu\n", cfg.counts.train, cfg.counts.val,
              cfg.counts.test);
  std::printf("  scale bounds: [%.6f, %.6f], master_seed=%llu\n", train.header.scale_min,
              train.header.scale_max, static_cast<unsigned long long>(train.header.master_seed));
  return 0;
}

template <typename T>
void stage_pretrain_ae(const RunConfig& cfg, std::size_t n_cw) {
  const CsiDataset train = load_split(cfg, "train");
  const CsiDataset val = load_split(cfg, "val");
  ModelBundle<T> bundle(cfg.autoencoder_spec(n_cw), cfg.dnnet_spec(n_cw), cfg.master_seed);
  StageResult result = pretrain_autoencoder(bundle, train, val, cfg.training);

  fs::create_directories(cfg.checkpoint_dir);
  const fs::path path = ae_checkpoint_path(cfg, n_cw);
  save_checkpoint(bundle, kPartAutoencoder, path);
  result.checkpoint_path = path.filename().string();
  write_manifest(cfg, n_cw, "pretrain-ae", result);
  std::printf("[pretrain-ae cw=%zu] epochs=%zu final_loss=%.6g best_val_nmse=%.3f dB (%.1fs)\n",
              n_cw, result.epochs_run, result.final_train_loss, result.best_val_nmse_db,
              result.wall_time_s);
}

template <typename T>
void stage_pretrain_dn(const RunConfig& cfg, std::size_t n_cw) {
  const CsiDataset train = load_split(cfg, "train");
  const CsiDataset val = load_split(cfg, "val");
  ModelBundle<T> bundle(cfg.autoencoder_spec(n_cw), cfg.dnnet_spec(n_cw), cfg.master_seed);
  require_checkpoint(ae_checkpoint_path(cfg, n_cw), "pretrain-ae");
  load_checkpoint(ae_checkpoint_path(cfg, n_cw), bundle);

  Rng pair_rng(seed_mix(cfg.master_seed, seed_tag("dn-pairs"), n_cw));
  const NoiseModel noise = NoiseModel::from_snr(cfg.training.snr_db, n_cw);
  CodewordPairs<T> pairs = generate_dnnet_dataset(bundle, train, noise, pair_rng,
                                                  cfg.training.batch_size,
                                                  cfg.training.snr_range_db);
  StageResult result = pretrain_dnnet(bundle, pairs, val, cfg.training);

  fs::create_directories(cfg.checkpoint_dir);
  const fs::path path = dn_checkpoint_path(cfg, n_cw);
  save_checkpoint(bundle, kPartDnnet, path);
  result.checkpoint_path = path.filename().string();
  write_manifest(cfg, n_cw, "pretrain-dn", result);
  std::printf("[pretrain-dn cw=%zu] epochs=%zu final_loss=%.6g best_val_nmse=%.3f dB (%.1fs)\n",
              n_cw, result.epochs_run, result.final_train_loss, result.best_val_nmse_db,
              result.wall_time_s);
}

template <typename T>
void stage_joint(const RunConfig& cfg, std::size_t n_cw) {
  const CsiDataset train = load_split(cfg, "train");
  const CsiDataset val = load_split(cfg, "val");
  ModelBundle<T> bundle(cfg.autoencoder_spec(n_cw), cfg.dnnet_spec(n_cw), cfg.master_seed);
  require_checkpoint(ae_checkpoint_path(cfg, n_cw), "pretrain-ae");
  require_checkpoint(dn_checkpoint_path(cfg, n_cw), "pretrain-dn");
  load_checkpoint(ae_checkpoint_path(cfg, n_cw), bundle);
  load_checkpoint(dn_checkpoint_path(cfg, n_cw), bundle);

  StageResult result = joint_train(bundle, train, val, cfg.training);

  fs::create_directories(cfg.checkpoint_dir);
  const fs::path path = joint_checkpoint_path(cfg, n_cw);
  save_checkpoint(bundle, kPartAll, path);
  result.checkpoint_path = path.filename().string();
  write_manifest(cfg, n_cw, "joint", result);
  std::printf("[joint cw=%zu] epochs=%zu final_loss=%.6g best_val_nmse=%.3f dB (%.1fs)\n", n_cw,
              result.epochs_run, result.final_train_loss, result.best_val_nmse_db,
              result.wall_time_s);
}

template <typename T>
void run_stages(const RunConfig& cfg, const std::string& stage) {
  for (std::size_t n_cw : cfg.codeword_lengths) {
    if (stage == "pretrain-ae" || stage == "all") stage_pretrain_ae<T>(cfg, n_cw);
    if (stage == "pretrain-dn" || stage == "all") stage_pretrain_dn<T>(cfg, n_cw);
    if (stage == "joint" || stage == "all") stage_joint<T>(cfg, n_cw);
  }
}

int cmd_train(const fs::path& config_path, const std::string& stage) {
  const RunConfig cfg = RunConfig::load(config_path);
  if (cfg.training.precision == Precision::f32) {
    run_stages<float>(cfg, stage);
  } else {
    run_stages<double>(cfg, stage);
  }
  return 0;
}

std::size_t checkpoint_codeword_length(const CheckpointData& data) {
  const auto& part = data.parts.front();
  if (part.empty()) throw FormatError("checkpoint has an empty part");
  if (data.mask & kPartEncoder) return part.back().spec.output_dims.at(0);  // encoder fc
  return part.front().spec.input_dims.at(0);  // decoder fc / denoiser bn
}

struct ResolvedBundle {
  std::size_t n_cw = 0;
  uint8_t mask = 0;
  fs::path path;
};

ResolvedBundle resolve_checkpoint(const RunConfig& cfg, std::size_t n_cw) {
  ResolvedBundle r;
  r.n_cw = n_cw;
  const fs::path joint = joint_checkpoint_path(cfg, n_cw);
  if (fs::exists(joint)) {
    r.path = joint;
    r.mask = kPartAll;
    return r;
  }
  const fs::path ae = ae_checkpoint_path(cfg, n_cw);
  require_checkpoint(ae, "pretrain-ae");
  r.path = ae;
  r.mask = kPartAutoencoder;
  return r;
}

int cmd_evaluate(const fs::path& config_path, const std::string& checkpoint_arg, bool no_dnnet,
                 const std::string& reference_arg) {
  const RunConfig cfg = RunConfig::load(config_path);
  const CsiDataset test = load_split(cfg, "test");
  const std::size_t test_offset = cfg.counts.train + cfg.counts.val;
  const ReferenceMode reference =
      reference_arg.empty() ? cfg.reference_mode : reference_mode_from_name(reference_arg);

  MetricsReport combined;
  auto evaluate_one = [&](const fs::path& ckpt_path, std::size_t n_cw) {
    ModelBundle<float> bundle(cfg.autoencoder_spec(n_cw), cfg.dnnet_spec(n_cw), cfg.master_seed);
    uint8_t mask = load_checkpoint(ckpt_path, bundle);
    // The pre-training stages store the autoencoder and denoiser in two
    // files; pick up the denoiser sibling when evaluating pre-trained
    // bundles with the denoiser engaged.
    if (!(mask & kPartDnnet) && !no_dnnet) {
      const fs::path dn = dn_checkpoint_path(cfg, n_cw);
      if (fs::exists(dn)) mask |= load_checkpoint(dn, bundle);
    }
    SweepOptions opts;
    opts.snr_list = cfg.snr_list;
    opts.include_noise_free = cfg.include_noise_free;
    opts.use_dnnet = !no_dnnet;
    opts.noise_free_uses_dnnet = cfg.noise_free_uses_dnnet && !no_dnnet;
    opts.reference = reference;
    opts.eval_seed = cfg.effective_eval_seed();
    opts.batch_size = cfg.eval_batch_size;
    opts.checkpoint_id = ckpt_path.filename().string();
    opts.parts_available = mask;
    MetricsReport report = evaluate_bundle(bundle, test, opts, &cfg.channel, test_offset);
    combined.records.insert(combined.records.end(), report.records.begin(),
                            report.records.end());
  };

  if (!checkpoint_arg.empty()) {
    const fs::path path = checkpoint_arg;
    const CheckpointData data = read_checkpoint_file(path);
    evaluate_one(path, checkpoint_codeword_length(data));
  } else {
    for (std::size_t n_cw : cfg.codeword_lengths) {
      const ResolvedBundle r = resolve_checkpoint(cfg, n_cw);
      evaluate_one(r.path, r.n_cw);
    }
  }

  sort_report(combined);
  fs::create_directories(cfg.report_dir);
  const fs::path rows = cfg.report_dir / "report_rows.csv";
  const fs::path curves = cfg.report_dir / "report_curves.txt";
  emit_report_rows(combined, rows);
  emit_report_curves(combined, curves);

  for (const MetricsRecord& r : combined.records) {
    std::printf("gamma=%-8.6g snr=%-6s nmse=%8.3f dB  rho=%.4f  (%zu samples, %s)\n", r.gamma,
                r.snr_db ? std::to_string(*r.snr_db).c_str() : "inf", r.nmse_db, r.rho, r.samples,
                r.reference_mode.c_str());
  }
  std::printf("reports written: %s, %s\n", rows.string().c_str(), curves.string().c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"csidn: noisy CSI feedback laboratory (dataset generation, two-stage "
               "training, SNR sweeps)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string stage = "all";
  std::string checkpoint_arg;
  std::string reference_arg;
  bool no_dnnet = false;

  CLI::App* generate = app.add_subcommand("generate", "generate the train/val/test dataset files");
  generate->add_option("config", config_path, "run configuration (JSON)")->required();

  CLI::App* train = app.add_subcommand("train", "run the training stages");
  train->add_option("config", config_path, "run configuration (JSON)")->required();
  train->add_option("--stage", stage, "pretrain-ae | pretrain-dn | joint | all")
      ->check(CLI::IsMember({"pretrain-ae", "pretrain-dn", "joint", "all"}));

  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate checkpoints over the SNR sweep");
  evaluate->add_option("config", config_path, "run configuration (JSON)")->required();
  evaluate->add_option("--checkpoint", checkpoint_arg, "evaluate this checkpoint file only");
  evaluate->add_flag("--no-dnnet", no_dnnet, "bypass the denoiser (bare autoencoder path)");
  evaluate->add_option("--reference-mode", reference_arg, "truncated | full")
      ->check(CLI::IsMember({"truncated", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (generate->parsed()) return cmd_generate(config_path);
    if (train->parsed()) return cmd_train(config_path, stage);
    if (evaluate->parsed()) return cmd_evaluate(config_path, checkpoint_arg, no_dnnet, reference_arg);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config-error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io-error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format-error: " << e.what() << "\n";
    return 4;
  } catch (const DimensionError& e) {
    std::cerr << "dimension-error: " << e.what() << "\n";
    return 5;
  } catch (const StateError& e) {
    std::cerr << "state-error: " << e.what() << "\n";
    return 6;
  } catch (const RangeError& e) {
    std::cerr << "range-error: " << e.what() << "\n";
    return 7;
  } catch (const DegenerateError& e) {
    std::cerr << "degenerate-error: " << e.what() << "\n";
    return 8;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace csidn
