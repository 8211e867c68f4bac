// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "csidn/cli.hpp"
#include "csidn/config.hpp"

using namespace csidn;
namespace fs = std::filesystem;

namespace {

int run(std::initializer_list<std::string> args) {
  std::vector<std::string> strings{"csidn"};
  strings.insert(strings.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : strings) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct TempCwd {
  fs::path old = fs::current_path();
  explicit TempCwd(const char* tag) {
    fs::path dir = fs::temp_directory_path() / (std::string("csidn_cli_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::current_path(dir);
  }
  ~TempCwd() { fs::current_path(old); }
};

struct CerrCapture {
  std::stringstream ss;
  std::streambuf* old = std::cerr.rdbuf(ss.rdbuf());
  ~CerrCapture() { std::cerr.rdbuf(old); }
  std::string text() const { return ss.str(); }
};

const char* kSmallConfig = R"({
  "master_seed": 3,
  "channel": {"n_t": 8, "n_c": 32, "n_p": 8, "num_paths": 4, "delay_spread_rows": 1.0},
  "dataset": {"train_samples": 60, "val_samples": 16, "test_samples": 16,
              "scale_bounds": {"min": -60.0, "max": 60.0}},
  "autoencoder": {"codeword_lengths": [16]},
  "dnnet": {"total_layers": 4, "hidden_width": 32, "beta": 0.05, "lambda_kl": 0.001},
  "training": {"learning_rate": 0.001, "batch_size": 16, "pretrain_epochs_ae": 2,
               "pretrain_epochs_dn": 2, "joint_epochs": 2, "snr_db": 0.0},
  "evaluation": {"snr_list": [0.0, 10.0], "batch_size": 8},
  "paths": {"data_dir": "data", "checkpoint_dir": "ckpt", "report_dir": "reports"}
})";

void write_config(const char* text = kSmallConfig, const char* name = "run.json") {
  std::ofstream os(name);
  os << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generate creates three dataset files and is deterministic") {
  TempCwd cwd("generate");
  write_config();
  CHECK(run({"generate", "run.json"}) == 0);
  CHECK(fs::exists("data/train.csid"));
  CHECK(fs::exists("data/val.csid"));
  CHECK(fs::exists("data/test.csid"));

  const std::string first = read_file("data/train.csid");
  CHECK(run({"generate", "run.json"}) == 0);
  CHECK(read_file("data/train.csid") == first);
}

TEST_CASE("config with oversized codeword is rejected naming the ratio constraint") {
  TempCwd cwd("badcw");
  write_config(R"({
    "channel": {"n_t": 8, "n_c": 32, "n_p": 8},
    "autoencoder": {"codeword_lengths": [1000]}
  })");
  CerrCapture cap;
  CHECK(run({"generate", "run.json"}) == 2);
  CHECK(cap.text().find("config-error:") == 0);
  CHECK(cap.text().find("compression ratio") != std::string::npos);
  CHECK(!fs::exists("data"));
}

TEST_CASE("unknown config keys are rejected before anything is written") {
  TempCwd cwd("unknown");
  write_config(R"({"channel": {"n_t": 8, "n_c": 32, "n_p": 8, "antennas": 4}})");
  CerrCapture cap;
  CHECK(run({"generate", "run.json"}) == 2);
  CHECK(cap.text().find("config-error:") == 0);
  CHECK(cap.text().find("antennas") != std::string::npos);
  CHECK(!fs::exists("data"));

  write_config(R"({"color": "blue"})");
  CHECK(run({"generate", "run.json"}) == 2);
}

TEST_CASE("joint stage without pretrained checkpoints names the missing stage") {
  TempCwd cwd("prereq");
  write_config();
  REQUIRE(run({"generate", "run.json"}) == 0);
  CerrCapture cap;
  CHECK(run({"train", "run.json", "--stage", "joint"}) == 6);
  CHECK(cap.text().find("state-error:") == 0);
  CHECK(cap.text().find("pretrain-ae") != std::string::npos);

  CHECK(run({"train", "run.json", "--stage", "pretrain-dn"}) == 6);
}

TEST_CASE("full pipeline: train all stages, evaluate, byte-identical reports") {
  TempCwd cwd("full");
  write_config();
  REQUIRE(run({"generate", "run.json"}) == 0);
  REQUIRE(run({"train", "run.json", "--stage", "all"}) == 0);

  CHECK(fs::exists("ckpt/pretrain_ae_cw16.ckpt"));
  CHECK(fs::exists("ckpt/pretrain_dn_cw16.ckpt"));
  CHECK(fs::exists("ckpt/joint_cw16.ckpt"));
  CHECK(fs::exists("ckpt/manifest_pretrain-ae_cw16.json"));
  CHECK(fs::exists("ckpt/manifest_pretrain-dn_cw16.json"));
  CHECK(fs::exists("ckpt/manifest_joint_cw16.json"));

  REQUIRE(run({"evaluate", "run.json"}) == 0);
  const std::string rows = read_file("reports/report_rows.csv");
  // header + 2 SNR records + noise-free pass
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 4);
  CHECK(rows.find("gamma,snr_db,nmse_db,rho,samples,reference_mode,checkpoint,seed\n") == 0);
  CHECK(rows.find("joint_cw16.ckpt") != std::string::npos);
  CHECK(rows.find(",inf,") != std::string::npos);

  const std::string curves = read_file("reports/report_curves.txt");
  REQUIRE(run({"evaluate", "run.json"}) == 0);
  CHECK(read_file("reports/report_rows.csv") == rows);
  CHECK(read_file("reports/report_curves.txt") == curves);

  // Bare-autoencoder path via --no-dnnet differs from the denoised path.
  REQUIRE(run({"evaluate", "run.json", "--no-dnnet"}) == 0);
  CHECK(read_file("reports/report_rows.csv") != rows);

  // Explicit checkpoint evaluation: the pretrained autoencoder alone.
  REQUIRE(run({"evaluate", "run.json", "--checkpoint", "ckpt/pretrain_ae_cw16.ckpt",
               "--no-dnnet"}) == 0);
  CHECK(read_file("reports/report_rows.csv").find("pretrain_ae_cw16.ckpt") != std::string::npos);

  // Reference mode flag switches the recorded mode.
  REQUIRE(run({"evaluate", "run.json", "--reference-mode", "full"}) == 0);
  CHECK(read_file("reports/report_rows.csv").find("full-reference") != std::string::npos);
}

TEST_CASE("rerunning a completed stage reproduces the manifest") {
  TempCwd cwd("rerun");
  write_config();
  REQUIRE(run({"generate", "run.json"}) == 0);
  REQUIRE(run({"train", "run.json", "--stage", "pretrain-ae"}) == 0);
  const std::string manifest = read_file("ckpt/manifest_pretrain-ae_cw16.json");
  REQUIRE(run({"train", "run.json", "--stage", "pretrain-ae"}) == 0);
  const std::string manifest2 = read_file("ckpt/manifest_pretrain-ae_cw16.json");
  // Identical up to wall time: compare the loss trace line by line.
  auto extract = [](const std::string& m, const char* key) {
    const auto pos = m.find(key);
    return m.substr(pos, m.find(']', pos) - pos);
  };
  CHECK(extract(manifest, "\"loss_trace\"") == extract(manifest2, "\"loss_trace\""));
  CHECK(extract(manifest, "\"val_nmse_trace\"") == extract(manifest2, "\"val_nmse_trace\""));
}

TEST_CASE("evaluate with default dnnet engagement fails cleanly without a denoiser") {
  TempCwd cwd("nodnnet");
  write_config();
  REQUIRE(run({"generate", "run.json"}) == 0);
  REQUIRE(run({"train", "run.json", "--stage", "pretrain-ae"}) == 0);
  CerrCapture cap;
  CHECK(run({"evaluate", "run.json"}) == 2);  // dnnet requested, not trained
  CHECK(cap.text().find("config-error:") == 0);
  CHECK(run({"evaluate", "run.json", "--no-dnnet"}) == 0);
}

TEST_CASE("dataset/config mismatch is rejected") {
  TempCwd cwd("mismatch");
  write_config();
  REQUIRE(run({"generate", "run.json"}) == 0);
  // Same geometry, different master seed.
  std::string other = kSmallConfig;
  other.replace(other.find("\"master_seed\": 3"), 16, "\"master_seed\": 4");
  std::ofstream("other.json") << other;
  CHECK(run({"train", "other.json", "--stage", "pretrain-ae"}) == 2);
}
