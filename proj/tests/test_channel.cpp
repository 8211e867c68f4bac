// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "csidn/channel.hpp"
#include "csidn/dataset.hpp"
#include "csidn/dft.hpp"
#include "csidn/rng.hpp"
#include "oracles.hpp"

using namespace csidn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("csidn_test_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Paths with integer delay bins have no leakage outside their delay rows,
// so truncation at n_p is exactly lossless.
std::vector<PathComponent> integer_delay_paths(Rng& rng, std::size_t count, uint32_t max_bin) {
  std::vector<PathComponent> paths(count);
  for (auto& p : paths) {
    p.theta = rng.uniform(-1.2, 1.2);
    p.delay_rows = static_cast<double>(rng.next_u64() % max_bin);
    p.gain = cplx(rng.gaussian(), rng.gaussian());
  }
  return paths;
}

}  // namespace

// ---------------------------------------------------------------------------
// dft_matrix
// ---------------------------------------------------------------------------

TEST_CASE("dft_matrix n=1 and n=2") {
  CMat f1 = dft_matrix(1);
  CHECK(f1(0, 0).real() == doctest::Approx(1.0));
  CHECK(f1(0, 0).imag() == doctest::Approx(0.0));

  CMat f2 = dft_matrix(2);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(f2(0, 0).real() == doctest::Approx(r));
  CHECK(f2(0, 1).real() == doctest::Approx(r));
  CHECK(f2(1, 0).real() == doctest::Approx(r));
  CHECK(f2(1, 1).real() == doctest::Approx(-r));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(f2(i, j).imag()) < 1e-15);
}

TEST_CASE("dft_matrix n=8 is unitary to 1e-12 per entry") {
  CMat f = dft_matrix(8);
  CMat prod = matmul(f, f.adjoint());
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      const cplx want = i == j ? cplx(1, 0) : cplx(0, 0);
      CHECK(std::abs(prod(i, j) - want) < 1e-12);
    }
}

TEST_CASE("dft_matrix rejects n=0") { CHECK_THROWS_AS(dft_matrix(0), ConfigError); }

// ---------------------------------------------------------------------------
// channel generation
// ---------------------------------------------------------------------------

TEST_CASE("single broadside path with zero delay gives the all-ones matrix") {
  std::vector<PathComponent> paths{{cplx(1.0, 0.0), 0.0, 0.0}};
  CMat h = synthesize_spatial_frequency(paths, 16, 4);
  for (std::size_t r = 0; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) {
      CHECK(h(r, c).real() == doctest::Approx(1.0));
      CHECK(std::abs(h(r, c).imag()) < 1e-12);
    }
}

TEST_CASE("generate_channel is deterministic in (master_seed, sample_index)") {
  ChannelConfig cfg;
  cfg.n_c = 64;
  cfg.n_t = 8;
  cfg.n_p = 16;
  cfg.master_seed = 42;
  CMat a = generate_channel(cfg, 7);
  CMat b = generate_channel(cfg, 7);
  REQUIRE(a.rows() == b.rows());
  for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) {
    CHECK(a.data()[i].real() == b.data()[i].real());
    CHECK(a.data()[i].imag() == b.data()[i].imag());
  }
  CMat c = generate_channel(cfg, 8);
  bool differs = false;
  for (std::size_t i = 0; i < a.rows() * a.cols() && !differs; ++i)
    differs = a.data()[i] != c.data()[i];
  CHECK(differs);
  CHECK(a.all_finite());
  CHECK(a.fro_norm() > 0.0);
}

TEST_CASE("generated channels concentrate energy in the first n_p delay rows") {
  ChannelConfig cfg;  // desk-scale defaults, delay_spread_rows = 1
  cfg.master_seed = 1;
  const DftPair dft = DftPair::for_dims(cfg.n_c, cfg.n_t);
  double mean_frac = 0.0;
  const int samples = 200;
  for (int i = 0; i < samples; ++i) {
    CMat h_ad = to_angular_delay(generate_channel(cfg, static_cast<uint64_t>(i)), dft);
    double inband = 0.0;
    for (uint32_t r = 0; r < cfg.n_p; ++r)
      for (uint32_t c = 0; c < cfg.n_t; ++c) inband += std::norm(h_ad(r, c));
    mean_frac += inband / h_ad.fro_norm_sq();
  }
  mean_frac /= samples;
  CHECK(mean_frac > 0.95);
}

// ---------------------------------------------------------------------------
// angle-delay transform
// ---------------------------------------------------------------------------

TEST_CASE("to_angular_delay of all-ones has a single peak at (0,0)") {
  const std::size_t n_c = 16, n_t = 4;
  CMat ones(n_c, n_t);
  for (std::size_t i = 0; i < n_c * n_t; ++i) ones.data()[i] = cplx(1, 0);
  CMat ad = to_angular_delay(ones);
  CHECK(ad(0, 0).real() == doctest::Approx(std::sqrt(static_cast<double>(n_c * n_t))));
  for (std::size_t r = 0; r < n_c; ++r)
    for (std::size_t c = 0; c < n_t; ++c) {
      if (r == 0 && c == 0) continue;
      CHECK(std::abs(ad(r, c)) < 1e-10);
    }
}

TEST_CASE("transform preserves Frobenius norm and round-trips") {
  ChannelConfig cfg;
  cfg.n_c = 64;
  cfg.n_t = 8;
  cfg.n_p = 16;
  cfg.master_seed = 3;
  const DftPair dft = DftPair::for_dims(cfg.n_c, cfg.n_t);
  for (uint64_t i = 0; i < 5; ++i) {
    CMat h = generate_channel(cfg, i);
    CMat ad = to_angular_delay(h, dft);
    CHECK(std::abs(ad.fro_norm() - h.fro_norm()) / h.fro_norm() < 1e-10);
    CMat back = from_angular_delay(ad, dft);
    CHECK(rel_fro_dist(h, back) < 1e-10);
  }
}

TEST_CASE("to_angular_delay matches the naive triple-product oracle") {
  Rng rng(17);
  const std::size_t n_c = 12, n_t = 6;
  CMat h(n_c, n_t);
  for (std::size_t i = 0; i < n_c * n_t; ++i)
    h.data()[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
  const DftPair dft = DftPair::for_dims(n_c, n_t);
  CMat got = to_angular_delay(h, dft);
  CMat want = oracle::naive_triple_product_adjoint(dft.delay, h, dft.angle);
  CHECK(rel_fro_dist(want, got) < 1e-8);
}

TEST_CASE("to_angular_delay rejects mismatched dims") {
  CMat h(8, 4);
  const DftPair dft = DftPair::for_dims(16, 4);
  CHECK_THROWS_AS(to_angular_delay(h, dft), DimensionError);
}

// ---------------------------------------------------------------------------
// truncation and scaling
// ---------------------------------------------------------------------------

TEST_CASE("scaling endpoints and midpoint") {
  CMat ad(4, 2);
  ad(0, 0) = cplx(-2.0, 2.0);  // real hits scale_min, imag hits scale_max
  ad(0, 1) = cplx(0.0, 0.0);
  const ScaleBounds b{-2.0, 2.0};
  TruncatedCsi t = truncate_and_scale(ad, 2, b);
  CHECK(t.values[0] == doctest::Approx(0.0));          // real(0,0)
  CHECK(t.values[2 * 2 + 0] == doctest::Approx(1.0));  // imag(0,0)
  CHECK(t.values[1] == doctest::Approx(0.5));          // zero at midpoint
}

TEST_CASE("scale/unscale round-trips to 1e-6") {
  Rng rng(23);
  const ScaleBounds b{-3.7, 5.1};
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(b.lo, b.hi);
    const double rt = invert_scale(static_cast<float>(apply_scale(x, b)), b);
    CHECK(std::abs(rt - x) < 1e-6);
  }
}

TEST_CASE("out-of-range value raises a range error naming the value") {
  CMat ad(2, 1);
  ad(0, 0) = cplx(9.5, 0.0);
  try {
    truncate_and_scale(ad, 2, {-1.0, 1.0});
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("9.5") != std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// inverse pipeline
// ---------------------------------------------------------------------------

TEST_CASE("inverse_pipeline recovers channels whose delays sit on in-band bins") {
  Rng rng(31);
  const uint32_t n_c = 64, n_t = 16, n_p = 16;
  const DftPair dft = DftPair::for_dims(n_c, n_t);
  for (int trial = 0; trial < 5; ++trial) {
    CMat h = synthesize_spatial_frequency(integer_delay_paths(rng, 4, n_p), n_c, n_t);
    CMat ad = to_angular_delay(h, dft);
    // Snug bounds over the actual truncated values.
    Tensor<double> raw = truncate_real_imag(ad, n_p);
    double lo = raw[0], hi = raw[0];
    for (std::size_t i = 0; i < raw.size(); ++i) {
      lo = std::min(lo, raw[i]);
      hi = std::max(hi, raw[i]);
    }
    TruncatedCsi t = truncate_and_scale(ad, n_p, {lo - 1e-9, hi + 1e-9});
    CMat back = inverse_pipeline(t.values, t.bounds, dft);
    CHECK(rel_fro_dist(h, back) < 1e-6);
  }
}

TEST_CASE("inverse_pipeline of the zero tensor is the zero matrix") {
  const DftPair dft = DftPair::for_dims(16, 4);
  Tensor<float> zero({2, 8, 4}, 0.5f);  // midpoint of symmetric bounds = raw 0
  CMat back = inverse_pipeline(zero, ScaleBounds{-1.0, 1.0}, dft);
  for (std::size_t i = 0; i < back.rows() * back.cols(); ++i)
    CHECK(std::abs(back.data()[i]) < 1e-7);
}

TEST_CASE("inverse_pipeline matches generate/forward/invert on in-band energy") {
  // delay_spread_rows = 0.5 with delays rounded onto bins: energy is fully
  // inside the first n_p rows, so reconstruction is exact.
  Rng rng(37);
  const uint32_t n_c = 128, n_t = 16, n_p = 32;
  const DftPair dft = DftPair::for_dims(n_c, n_t);
  CMat h = synthesize_spatial_frequency(integer_delay_paths(rng, 6, n_p / 2), n_c, n_t);
  CMat ad = to_angular_delay(h, dft);
  Tensor<double> raw = truncate_real_imag(ad, n_p);
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    lo = std::min(lo, raw[i]);
    hi = std::max(hi, raw[i]);
  }
  TruncatedCsi t = truncate_and_scale(ad, n_p, {lo - 1e-9, hi + 1e-9});
  CMat back = inverse_pipeline(t.values, t.bounds, dft);
  CHECK(rel_fro_dist(h, back) < 1e-6);
}

// ---------------------------------------------------------------------------
// dataset files
// ---------------------------------------------------------------------------

TEST_CASE("build_dataset writes consistent headers and in-range payloads") {
  ChannelConfig cfg;
  cfg.n_c = 32;
  cfg.n_t = 4;
  cfg.n_p = 8;
  cfg.master_seed = 11;
  const fs::path dir = temp_dir("ds1");
  DatasetPaths paths = build_dataset(cfg, {4, 2, 2}, ScaleBounds{-40.0, 40.0}, dir);

  CsiDataset train = CsiDataset::load(paths.train);
  CsiDataset val = CsiDataset::load(paths.val);
  CsiDataset test = CsiDataset::load(paths.test);
  CHECK(train.count() == 4);
  CHECK(val.count() == 2);
  CHECK(test.count() == 2);
  for (const CsiDataset* ds : {&train, &val, &test}) {
    CHECK(ds->header.scale_min == train.header.scale_min);
    CHECK(ds->header.scale_max == train.header.scale_max);
    CHECK(ds->header.n_t == cfg.n_t);
    CHECK(ds->header.n_c == cfg.n_c);
    CHECK(ds->header.n_p == cfg.n_p);
    CHECK(ds->header.master_seed == cfg.master_seed);
    for (float v : ds->payload) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  // Splits hold disjoint sample indices: train[0] is sample 0, val[0] is
  // sample 4, test[0] is sample 6.
  const DftPair dft = DftPair::for_dims(cfg.n_c, cfg.n_t);
  CMat h4 = to_angular_delay(generate_channel(cfg, 4), dft);
  TruncatedCsi t4 = truncate_and_scale(h4, cfg.n_p, train.header.bounds());
  Tensor<float> v0 = val.sample(0);
  for (std::size_t i = 0; i < v0.size(); ++i) CHECK(v0[i] == t4.values[i]);
  fs::remove_all(dir);
}

TEST_CASE("build_dataset re-run with the same master seed is bit-identical") {
  ChannelConfig cfg;
  cfg.n_c = 32;
  cfg.n_t = 4;
  cfg.n_p = 8;
  cfg.master_seed = 5;
  const fs::path a = temp_dir("ds2a");
  const fs::path b = temp_dir("ds2b");
  build_dataset(cfg, {3, 1, 1}, ScaleBounds{-40.0, 40.0}, a);
  build_dataset(cfg, {3, 1, 1}, ScaleBounds{-40.0, 40.0}, b);
  for (const char* name : {"train.csid", "val.csid", "test.csid"}) {
    std::ifstream fa(a / name, std::ios::binary), fb(b / name, std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
    CHECK(!ca.empty());
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("dataset load rejects bad magic and truncation") {
  const fs::path dir = temp_dir("ds3");
  const fs::path good = dir / "ok.csid";
  ChannelConfig cfg;
  cfg.n_c = 16;
  cfg.n_t = 2;
  cfg.n_p = 4;
  build_dataset(cfg, {2, 1, 1}, ScaleBounds{-40.0, 40.0}, dir);

  {
    std::ifstream in(dir / "train.csid", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes[0] = 'X';
    std::ofstream out(dir / "badmagic.csid", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(CsiDataset::load(dir / "badmagic.csid"), FormatError);

  {
    std::ifstream in(dir / "train.csid", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(dir / "short.csid", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS_AS(CsiDataset::load(dir / "short.csid"), FormatError);
  CHECK_THROWS_AS(CsiDataset::load(dir / "missing.csid"), IoError);
  fs::remove_all(dir);
  (void)good;
}

TEST_CASE("gather produces a batch tensor in sample order") {
  ChannelConfig cfg;
  cfg.n_c = 16;
  cfg.n_t = 2;
  cfg.n_p = 4;
  const fs::path dir = temp_dir("ds4");
  DatasetPaths paths = build_dataset(cfg, {3, 1, 1}, ScaleBounds{-40.0, 40.0}, dir);
  CsiDataset train = CsiDataset::load(paths.train);
  Tensor<float> batch;
  train.gather({2, 0}, batch);
  CHECK(batch.shape() == Shape{2, 2, 4, 2});
  Tensor<float> s2 = train.sample(2);
  for (std::size_t i = 0; i < s2.size(); ++i) CHECK(batch[i] == s2[i]);
  fs::remove_all(dir);
}

TEST_CASE("computed scale bounds come from the train split with a 5% margin") {
  ChannelConfig cfg;
  cfg.n_c = 32;
  cfg.n_t = 4;
  cfg.n_p = 8;
  cfg.master_seed = 2;
  const fs::path dir = temp_dir("ds5");
  DatasetPaths paths = build_dataset(cfg, {24, 4, 4}, std::nullopt, dir);
  CsiDataset train = CsiDataset::load(paths.train);

  // Recompute the expected bounds from the raw train tensors.
  const DftPair dft = DftPair::for_dims(cfg.n_c, cfg.n_t);
  double lo = 0, hi = 0;
  bool first = true;
  for (uint64_t i = 0; i < 24; ++i) {
    Tensor<double> raw =
        truncate_real_imag(to_angular_delay(generate_channel(cfg, i), dft), cfg.n_p);
    for (std::size_t j = 0; j < raw.size(); ++j) {
      if (first || raw[j] < lo) lo = raw[j];
      if (first || raw[j] > hi) hi = raw[j];
      first = false;
    }
  }
  const double margin = 0.05 * (hi - lo);
  CHECK(train.header.scale_min == doctest::Approx(lo - margin));
  CHECK(train.header.scale_max == doctest::Approx(hi + margin));

  CsiDataset val = CsiDataset::load(paths.val);
  CsiDataset test = CsiDataset::load(paths.test);
  CHECK(val.header.scale_min == train.header.scale_min);
  CHECK(test.header.scale_max == train.header.scale_max);
  fs::remove_all(dir);
}
