// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "csidn/bundle.hpp"
#include "csidn/checkpoint.hpp"
#include "csidn/codeword.hpp"
#include "csidn/loss.hpp"
#include "csidn/rng.hpp"
#include "oracles.hpp"

using namespace csidn;
namespace fs = std::filesystem;

namespace {

template <typename T>
Tensor<T> random_unit_interval(Shape shape, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform());
  return t;
}

template <typename T>
void zero_params(ParameterGroup<T> group) {
  for (auto& r : group.refs) r.value->zero();
}

template <typename T>
bool groups_bit_equal(ParameterGroup<T> a, ParameterGroup<T> b) {
  if (a.refs.size() != b.refs.size()) return false;
  for (std::size_t i = 0; i < a.refs.size(); ++i) {
    const Tensor<T>& x = *a.refs[i].value;
    const Tensor<T>& y = *b.refs[i].value;
    if (x.size() != y.size()) return false;
    if (std::memcmp(x.data(), y.data(), x.size() * sizeof(T)) != 0) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// compression ratio / encode
// ---------------------------------------------------------------------------

TEST_CASE("compression ratio is exact for the paper geometries") {
  AutoencoderSpec quarter{32, 32, 512};
  CHECK(quarter.gamma() == 0.25);
  AutoencoderSpec eighth{32, 32, 256};
  CHECK(eighth.gamma() == 0.125);
  for (std::size_t n_cw = 1; n_cw <= 2048; ++n_cw) {
    AutoencoderSpec s{32, 32, n_cw};
    CHECK(s.gamma() * 2048.0 == static_cast<double>(n_cw));
  }
  CHECK_THROWS_AS(AutoencoderSpec({32, 32, 2049}).validate(), ConfigError);
  CHECK_THROWS_AS(AutoencoderSpec({32, 32, 0}).validate(), ConfigError);
}

TEST_CASE("encoder output length equals the codeword length and is deterministic") {
  AutoencoderSpec spec{8, 4, 16};
  DnnetSpec dn{16, 4, 32, 0.05, 1e-3};
  ModelBundle<float> a(spec, dn, 99);
  ModelBundle<float> b(spec, dn, 99);
  Rng rng(7);
  Tensor<float> h = random_unit_interval<float>({3, 2, 8, 4}, rng);
  Tensor<float> sa = a.encoder.forward(h, Mode::infer);
  Tensor<float> sb = b.encoder.forward(h, Mode::infer);
  CHECK(sa.shape() == Shape{3, 16});
  CHECK(std::memcmp(sa.data(), sb.data(), sa.size() * sizeof(float)) == 0);
  Tensor<float> sa2 = a.encoder.forward(h, Mode::infer);
  CHECK(std::memcmp(sa.data(), sa2.data(), sa.size() * sizeof(float)) == 0);
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

TEST_CASE("normalize_codeword 3-4-5 case") {
  Codeword<double> s{Tensor<double>::from({2}, {3.0, 4.0}), false};
  Codeword<double> n = normalize_codeword(s);
  CHECK(n.values[0] == doctest::Approx(0.6));
  CHECK(n.values[1] == doctest::Approx(0.8));
  CHECK(n.normalized);
}

TEST_CASE("normalize_codeword is idempotent and unit-norm") {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    Codeword<double> s{Tensor<double>({8}), false};
    for (std::size_t i = 0; i < 8; ++i) s.values[i] = rng.uniform(-2, 2);
    Codeword<double> n = normalize_codeword(s);
    double norm = 0;
    for (std::size_t i = 0; i < 8; ++i) norm += n.values[i] * n.values[i];
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);
    Codeword<double> nn = normalize_codeword(n);
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(nn.values[i] - n.values[i]) < 1e-9);
  }
}

TEST_CASE("zero codeword is degenerate") {
  Codeword<double> z{Tensor<double>({4}), false};
  CHECK_THROWS_AS(normalize_codeword(z), DegenerateError);
  NormalizeLayer<float> layer;
  Tensor<float> batch({2, 4});
  batch[0] = 1.0f;  // row 0 fine, row 1 all zero
  CHECK_THROWS_AS(layer.forward(batch), DegenerateError);
}

// ---------------------------------------------------------------------------
// noise model
// ---------------------------------------------------------------------------

TEST_CASE("snr_to_sigma_sq inverts the SNR definition") {
  CHECK(snr_to_sigma_sq(0.0, 256) == doctest::Approx(1.0 / 256.0));
  CHECK(std::abs(snr_to_sigma_sq(15.0, 256) - 1.2352e-4) < 1e-8);
  CHECK(snr_to_sigma_sq(100.0, 256) < 1e-12 / 256.0 * 1e3);  // vanishing noise
  CHECK(snr_to_sigma_sq(100.0, 256) == doctest::Approx(1.0 / (256.0 * 1e10)));
}

TEST_CASE("add_noise with zero variance is the identity") {
  Rng rng(3);
  Codeword<float> s{Tensor<float>::from({3}, {0.5f, -0.25f, 0.1f}), true};
  Codeword<float> noisy = add_noise(s, NoiseModel{1e9, 0.0}, rng);
  for (std::size_t i = 0; i < 3; ++i) CHECK(noisy.values[i] == s.values[i]);
}

TEST_CASE("empirical SNR of add_noise matches the configured value") {
  const std::size_t n_cw = 64;
  const double snr_db = 10.0;
  const NoiseModel nm = NoiseModel::from_snr(snr_db, n_cw);
  Rng rng(seed_mix(1, seed_tag("noise-cal")));
  Codeword<double> s{Tensor<double>({n_cw}), false};
  for (std::size_t i = 0; i < n_cw; ++i) s.values[i] = rng.gaussian();
  s = normalize_codeword(s);

  double noise_energy = 0.0;
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    Codeword<double> noisy = add_noise(s, nm, rng);
    for (std::size_t i = 0; i < n_cw; ++i) {
      const double n = noisy.values[i] - s.values[i];
      noise_energy += n * n;
    }
  }
  const double empirical_db = 10.0 * std::log10(1.0 / (noise_energy / draws));
  CHECK(std::abs(empirical_db - snr_db) < 0.5);
}

TEST_CASE("add_noise is reproducible under a fixed seed") {
  Codeword<float> s{Tensor<float>({8}, 0.25f), true};
  const NoiseModel nm = NoiseModel::from_snr(5.0, 8);
  Rng a(42), b(42);
  Codeword<float> na = add_noise(s, nm, a);
  Codeword<float> nb = add_noise(s, nm, b);
  CHECK(std::memcmp(na.values.data(), nb.values.data(), 8 * sizeof(float)) == 0);
}

// ---------------------------------------------------------------------------
// DNNet
// ---------------------------------------------------------------------------

TEST_CASE("NEU with all-zero parameters outputs zero noise") {
  DnnetSpec spec{8, 4, 16, 0.05, 1e-3};
  Dnnet<float> dn(spec, Rng(1));
  zero_params(dn.param_group());
  Rng rng(2);
  Tensor<float> s = random_unit_interval<float>({4, 8}, rng);
  Tensor<float> n_hat = dn.neu_forward(s, Mode::train);
  for (std::size_t i = 0; i < n_hat.size(); ++i) CHECK(n_hat[i] == 0.0f);
  Tensor<float> shat = dn.denoise(s, Mode::train);
  CHECK(std::memcmp(shat.data(), s.data(), s.size() * sizeof(float)) == 0);
}

TEST_CASE("NEU output length equals codeword length across sizes") {
  for (std::size_t n_cw : {32ull, 256ull, 512ull}) {
    DnnetSpec spec{n_cw, 4, 1024, 0.05, 1e-3};
    Dnnet<float> dn(spec, Rng(n_cw));
    Tensor<float> s({2, n_cw}, 0.1f);
    Tensor<float> n_hat = dn.neu_forward(s, Mode::train);
    CHECK(n_hat.shape() == Shape{2, n_cw});
    for (const Tensor<float>& h : dn.hidden_activations()) {
      for (std::size_t i = 0; i < h.size(); ++i) {
        CHECK(h[i] > 0.0f);
        CHECK(h[i] < 1.0f);
      }
    }
  }
}

TEST_CASE("denoise plus extracted noise reconstructs the input codeword") {
  DnnetSpec spec{16, 5, 24, 0.05, 1e-3};  // two hidden layers
  Dnnet<float> dn(spec, Rng(7));
  Rng rng(8);
  Tensor<float> s({4, 16});
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(rng.uniform(-0.3, 0.3));
  Tensor<float> n_hat = dn.neu_forward(s, Mode::infer);
  Tensor<float> shat = dn.denoise(s, Mode::infer);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(std::abs(shat[i] + n_hat[i] - s[i]) < 1e-6f);
  }
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

TEST_CASE("decoder output shape and sigmoid range contract") {
  AutoencoderSpec spec{4, 4, 8};
  Decoder<float> dec(spec, Rng(3));
  Tensor<float> s({3, 8}, 0.2f);
  Tensor<float> h = dec.forward(s, Mode::infer);
  CHECK(h.shape() == Shape{3, 2, 4, 4});
  for (std::size_t i = 0; i < h.size(); ++i) {
    CHECK(h[i] > 0.0f);
    CHECK(h[i] < 1.0f);
  }
  Decoder<float> dec2(spec, Rng(3));
  Tensor<float> h2 = dec2.forward(s, Mode::infer);
  CHECK(std::memcmp(h.data(), h2.data(), h.size() * sizeof(float)) == 0);
}

TEST_CASE("refine block with zero conv weights is the identity") {
  Rng rng(5);
  RefineBlock<float> block(4, 4, rng);
  for (Conv2dLayer<float>* c : {&block.conv_a(), &block.conv_b(), &block.conv_c()}) {
    c->kernel().zero();
    c->bias().zero();
  }
  Tensor<float> x = random_unit_interval<float>({2, 2, 4, 4}, rng);
  Tensor<float> y = block.forward(x, Mode::infer);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

// ---------------------------------------------------------------------------
// end-to-end differentiability (64-bit)
// ---------------------------------------------------------------------------

TEST_CASE("full pipeline gradients match finite differences for all groups") {
  AutoencoderSpec ae{2, 4, 8};
  DnnetSpec dn{8, 4, 16, 0.2, 0.0};  // KL off; a dedicated case covers it
  ModelBundle<double> bundle(ae, dn, 17);
  // Bias the leaky-relu pre-activations away from the kink so central
  // differences stay valid.
  bundle.encoder.conv().bias().fill(0.5);
  bundle.decoder.block1().conv_a().bias().fill(0.5);
  bundle.decoder.block1().conv_b().bias().fill(0.5);
  bundle.decoder.block2().conv_a().bias().fill(0.5);
  bundle.decoder.block2().conv_b().bias().fill(0.5);
  // Fresh-init weights attenuate the denoiser's input-side gradients below
  // the finite-difference noise floor; scale them up so the relative check
  // is meaningful for every parameter tensor.
  for (auto& layer : bundle.dnnet.hidden_layers()) {
    for (std::size_t i = 0; i < layer.weight().size(); ++i) layer.weight()[i] *= 12.0;
  }
  for (std::size_t i = 0; i < bundle.dnnet.out_layer().weight().size(); ++i) {
    bundle.dnnet.out_layer().weight()[i] *= 12.0;
  }

  Rng rng(23);
  Tensor<double> h = random_unit_interval<double>({3, 2, 2, 4}, rng);
  // Generous noise keeps the batch variance seen by the denoiser's BN well
  // away from zero; near-zero variance makes the loss too curved for
  // central differences at h=1e-5.
  Tensor<double> noise({3, 8});
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = rng.uniform(-0.5, 0.5);

  NormalizeLayer<double> norm;
  auto forward_loss = [&]() {
    Tensor<double> s = bundle.encoder.forward(h, Mode::train);
    Tensor<double> sn = norm.forward(s);
    for (std::size_t i = 0; i < sn.size(); ++i) sn[i] += noise[i];
    Tensor<double> shat = bundle.dnnet.denoise(sn, Mode::train);
    Tensor<double> recon = bundle.decoder.forward(shat, Mode::train);
    return mse_loss(recon, h);
  };

  // Analytic gradients.
  bundle.zero_grad();
  {
    Tensor<double> s = bundle.encoder.forward(h, Mode::train);
    Tensor<double> sn = norm.forward(s);
    for (std::size_t i = 0; i < sn.size(); ++i) sn[i] += noise[i];
    Tensor<double> shat = bundle.dnnet.denoise(sn, Mode::train);
    Tensor<double> recon = bundle.decoder.forward(shat, Mode::train);
    Tensor<double> d = mse_loss_grad(recon, h);
    d = bundle.decoder.backward(d);
    d = bundle.dnnet.backward(d, false);
    d = norm.backward(d);
    bundle.encoder.backward(d);
  }

  for (ParameterGroup<double> group :
       {bundle.encoder.param_group(), bundle.decoder.param_group(), bundle.dnnet.param_group()}) {
    std::vector<Tensor<double>*> values;
    std::vector<const Tensor<double>*> grads;
    for (auto& r : group.refs) {
      values.push_back(r.value);
      grads.push_back(r.grad);
    }
    const double rel = oracle::fd_relative_error(values, grads, forward_loss);
    INFO("group ", group.name);
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("dnnet KL-regularized gradients match finite differences") {
  DnnetSpec dn{6, 4, 12, 0.2, 0.1};  // strong penalty to exercise the path
  Dnnet<double> net(dn, Rng(31));
  Rng rng(32);
  Tensor<double> s({4, 6});
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.uniform(-0.4, 0.4);
  Tensor<double> target({4, 6});
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = rng.uniform(-0.4, 0.4);

  auto forward_loss = [&]() {
    Tensor<double> shat = net.denoise(s, Mode::train);
    return mse_loss(shat, target) + dn.lambda_kl * net.kl_penalty();
  };

  net.zero_grad();
  Tensor<double> shat = net.denoise(s, Mode::train);
  net.backward(mse_loss_grad(shat, target), true);

  ParameterGroup<double> group = net.param_group();
  std::vector<Tensor<double>*> values;
  std::vector<const Tensor<double>*> grads;
  for (auto& r : group.refs) {
    values.push_back(r.value);
    grads.push_back(r.grad);
  }
  CHECK(oracle::fd_relative_error(values, grads, forward_loss) < 1e-6);
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

fs::path temp_file(const char* name) {
  fs::path dir = fs::temp_directory_path() / "csidn_ckpt_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("checkpoint round-trip is bit-identical") {
  AutoencoderSpec ae{4, 4, 8};
  DnnetSpec dn{8, 4, 16, 0.05, 1e-3};
  ModelBundle<float> src(ae, dn, 1);
  src.train_step = 12345;
  const fs::path path = temp_file("roundtrip.ckpt");
  save_checkpoint(src, kPartAll, path);

  ModelBundle<float> dst(ae, dn, 2);  // different init
  CHECK(!groups_bit_equal(src.encoder.param_group(), dst.encoder.param_group()));
  CHECK(load_checkpoint(path, dst) == kPartAll);
  CHECK(groups_bit_equal(src.encoder.param_group(), dst.encoder.param_group()));
  CHECK(groups_bit_equal(src.decoder.param_group(), dst.decoder.param_group()));
  CHECK(groups_bit_equal(src.dnnet.param_group(), dst.dnnet.param_group()));
  CHECK(dst.train_step == 12345);
}

TEST_CASE("checkpoint with wrong magic fails without partial state") {
  const fs::path path = temp_file("badmagic.ckpt");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTACKPTGARBAGE";
  }
  AutoencoderSpec ae{4, 4, 8};
  DnnetSpec dn{8, 4, 16, 0.05, 1e-3};
  ModelBundle<float> bundle(ae, dn, 3);
  ModelBundle<float> before(ae, dn, 3);
  CHECK_THROWS_AS(load_checkpoint(path, bundle), FormatError);
  CHECK(groups_bit_equal(bundle.encoder.param_group(), before.encoder.param_group()));
}

TEST_CASE("truncated checkpoint raises a corruption error") {
  AutoencoderSpec ae{4, 4, 8};
  DnnetSpec dn{8, 4, 16, 0.05, 1e-3};
  ModelBundle<float> src(ae, dn, 4);
  const fs::path full = temp_file("full.ckpt");
  save_checkpoint(src, kPartAll, full);
  std::ifstream in(full, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const fs::path cut = temp_file("cut.ckpt");
  {
    std::ofstream os(cut, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  ModelBundle<float> dst(ae, dn, 5);
  CHECK_THROWS_AS(load_checkpoint(cut, dst), FormatError);
}

TEST_CASE("encoder-only checkpoint leaves decoder and dnnet untouched") {
  AutoencoderSpec ae{4, 4, 8};
  DnnetSpec dn{8, 4, 16, 0.05, 1e-3};
  ModelBundle<float> src(ae, dn, 6);
  const fs::path path = temp_file("enc_only.ckpt");
  save_checkpoint(src, kPartEncoder, path);

  ModelBundle<float> dst(ae, dn, 7);
  ModelBundle<float> before(ae, dn, 7);
  CHECK(load_checkpoint(path, dst) == kPartEncoder);
  CHECK(groups_bit_equal(dst.encoder.param_group(), src.encoder.param_group()));
  CHECK(groups_bit_equal(dst.decoder.param_group(), before.decoder.param_group()));
  CHECK(groups_bit_equal(dst.dnnet.param_group(), before.dnnet.param_group()));
}

TEST_CASE("checkpoint geometry mismatch is rejected") {
  AutoencoderSpec ae{4, 4, 8};
  DnnetSpec dn{8, 4, 16, 0.05, 1e-3};
  ModelBundle<float> src(ae, dn, 8);
  const fs::path path = temp_file("geom.ckpt");
  save_checkpoint(src, kPartAll, path);

  AutoencoderSpec other{4, 4, 6};
  DnnetSpec other_dn{6, 4, 16, 0.05, 1e-3};
  ModelBundle<float> dst(other, other_dn, 9);
  CHECK_THROWS_AS(load_checkpoint(path, dst), FormatError);
}
