// SPDX-License-Identifier: Apache-2.0

/**
 * @file dnnet.hpp
 * @brief Codeword denoise network: batch-normalized input into a
 *        fully-connected noise extraction unit, whose output is subtracted
 *        from the raw codeword through a skip connection.
 *
 * The NEU has total_layers layers: pass-through input, total_layers - 2
 * sigmoid hidden layers of hidden_width neurons, and a linear output of
 * codeword length. Hidden activations are cached so the KL sparsity
 * penalty can see their batch means; the penalty's gradient is injected
 * during the reverse pass.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csidn/adam.hpp"
#include "csidn/layer.hpp"
#include "csidn/loss.hpp"
#include "csidn/rng.hpp"
#include "csidn/tensor.hpp"

namespace csidn {

struct DnnetSpec {
  std::size_t n_cw = 256;
  std::size_t total_layers = 4;  // input + hidden layers + linear output
  std::size_t hidden_width = 1024;
  double beta = 0.05;       // target sparsity factor
  double lambda_kl = 1e-3;  // penalty weight

  std::size_t hidden_count() const { return total_layers - 2; }

  void validate() const {
    if (n_cw == 0) throw ConfigError("dnnet: codeword length must be positive");
    if (total_layers < 3) {
      throw ConfigError("dnnet: total_layers must be >= 3, got " + std::to_string(total_layers));
    }
    if (hidden_width < n_cw) {
      throw ConfigError("dnnet: hidden_width must be >= codeword length, got " +
                        std::to_string(hidden_width) + " < " + std::to_string(n_cw));
    }
    if (!(beta > 0.0 && beta < 1.0)) {
      throw ConfigError("dnnet: sparsity factor beta must lie in (0,1), got " +
                        std::to_string(beta));
    }
    if (lambda_kl < 0.0) throw ConfigError("dnnet: lambda_kl must be >= 0");
  }
};

template <typename T>
class Dnnet {
 public:
  Dnnet(const DnnetSpec& spec, Rng rng)
      : spec_((spec.validate(), spec)),
        bn_(spec.n_cw),
        hidden_(make_hidden(spec, rng)),
        acts_(make_acts(spec)),
        out_(spec.hidden_count() > 0 ? spec.hidden_width : spec.n_cw, spec.n_cw, rng) {}

  /// Noise estimate extracted from the (noisy) codeword.
  Tensor<T> neu_forward(const Tensor<T>& s_tilde, Mode mode) {
    if (s_tilde.rank() != 2 || s_tilde.dim(1) != spec_.n_cw) {
      throw DimensionError("dnnet: input " + shape_str(s_tilde.shape()) +
                           " vs codeword length " + std::to_string(spec_.n_cw));
    }
    hidden_out_.clear();
    Tensor<T> x = bn_.forward(s_tilde, mode);
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      x = acts_[l].forward(hidden_[l].forward(x, mode), mode);
      hidden_out_.push_back(x);
    }
    return out_.forward(x, mode);
  }

  /// shat = s_tilde - NEU(BN(s_tilde)); the skip carries the raw codeword.
  Tensor<T> denoise(const Tensor<T>& s_tilde, Mode mode) {
    Tensor<T> n_hat = neu_forward(s_tilde, mode);
    Tensor<T> shat = s_tilde;
    for (std::size_t i = 0; i < shat.size(); ++i) shat[i] -= n_hat[i];
    has_cache_ = true;
    return shat;
  }

  /// Reverse pass for the denoise path. With with_kl set, the KL sparsity
  /// gradient (weight lambda_kl, target beta) is added at every hidden
  /// activation. Returns the gradient w.r.t. the raw codeword input.
  Tensor<T> backward(const Tensor<T>& d_shat, bool with_kl) {
    if (!has_cache_) throw StateError("dnnet backward before denoise");
    Tensor<T> d(d_shat.shape());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = -d_shat[i];  // d n_hat
    d = out_.backward(d);
    for (std::size_t l = hidden_.size(); l-- > 0;) {
      if (with_kl && spec_.lambda_kl > 0.0) {
        Tensor<T> kg = kl_sparsity_grad(hidden_out_[l], spec_.beta);
        const T lam = static_cast<T>(spec_.lambda_kl);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += lam * kg[i];
      }
      d = hidden_[l].backward(acts_[l].backward(d));
    }
    Tensor<T> ds = bn_.backward(d);
    for (std::size_t i = 0; i < ds.size(); ++i) ds[i] += d_shat[i];  // skip path
    return ds;
  }

  /// Total KL penalty of the activations cached by the last forward.
  double kl_penalty() const {
    double total = 0.0;
    for (const Tensor<T>& h : hidden_out_) total += kl_sparsity(h, spec_.beta);
    return total;
  }

  const std::vector<Tensor<T>>& hidden_activations() const { return hidden_out_; }

  void set_frozen(bool f) {
    frozen_ = f;
    bn_.set_frozen(f);
    for (auto& h : hidden_) h.set_frozen(f);
    out_.set_frozen(f);
  }
  bool frozen() const { return frozen_; }

  void zero_grad() {
    bn_.zero_grad();
    for (auto& h : hidden_) h.zero_grad();
    out_.zero_grad();
  }

  ParameterGroup<T> param_group() {
    ParameterGroup<T> g{"dnnet", {}, &frozen_};
    bn_.append_params(g.refs, "dnnet.bn");
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      hidden_[l].append_params(g.refs, "dnnet.hidden" + std::to_string(l));
    }
    out_.append_params(g.refs, "dnnet.out");
    return g;
  }

  std::vector<LayerSpec> layer_specs() const {
    std::vector<LayerSpec> specs{bn_.spec()};
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      specs.push_back(hidden_[l].spec());
      specs.push_back(acts_[l].spec());
    }
    specs.push_back(out_.spec());
    return specs;
  }
  std::vector<LayerBlob> export_blobs() const {
    std::vector<LayerBlob> blobs{bn_.export_blob()};
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      blobs.push_back(hidden_[l].export_blob());
      blobs.push_back(acts_[l].export_blob());
    }
    blobs.push_back(out_.export_blob());
    return blobs;
  }
  void import_blobs(const std::vector<LayerBlob>& blobs) {
    const std::size_t want = 2 + 2 * hidden_.size();
    if (blobs.size() != want) {
      throw FormatError("dnnet: expected " + std::to_string(want) + " layers, got " +
                        std::to_string(blobs.size()));
    }
    std::size_t pos = 0;
    bn_.import_blob(blobs[pos++]);
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      hidden_[l].import_blob(blobs[pos++]);
      acts_[l].import_blob(blobs[pos++]);
    }
    out_.import_blob(blobs[pos]);
  }

  BatchNormLayer<T>& bn() { return bn_; }
  std::vector<DenseLayer<T>>& hidden_layers() { return hidden_; }
  DenseLayer<T>& out_layer() { return out_; }
  const DnnetSpec& spec() const { return spec_; }

 private:
  DnnetSpec spec_;
  BatchNormLayer<T> bn_;
  std::vector<DenseLayer<T>> hidden_;
  std::vector<ActivationLayer<T>> acts_;
  DenseLayer<T> out_;
  std::vector<Tensor<T>> hidden_out_;
  bool has_cache_ = false;
  bool frozen_ = false;

  static std::vector<DenseLayer<T>> make_hidden(const DnnetSpec& spec, Rng& rng) {
    std::vector<DenseLayer<T>> layers;
    std::size_t in = spec.n_cw;
    for (std::size_t l = 0; l < spec.hidden_count(); ++l) {
      layers.emplace_back(in, spec.hidden_width, rng);
      in = spec.hidden_width;
    }
    return layers;
  }
  static std::vector<ActivationLayer<T>> make_acts(const DnnetSpec& spec) {
    std::vector<ActivationLayer<T>> acts;
    for (std::size_t l = 0; l < spec.hidden_count(); ++l) {
      acts.emplace_back(ActKind::sigmoid, Shape{spec.hidden_width});
    }
    return acts;
  }
};

}  // namespace csidn
