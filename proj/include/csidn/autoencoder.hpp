// SPDX-License-Identifier: Apache-2.0

/**
 * @file autoencoder.hpp
 * @brief Compression autoencoder for truncated angle-delay CSI.
 *
 * Encoder: conv2d(2->2, 3x3) + leaky_relu, flatten, dense to the codeword.
 * Decoder: dense back to 2*n_p*n_t, reshape, two convolutional refinement
 * blocks with skip connections, final sigmoid so the output lives in the
 * scaled input range (0,1).
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csidn/adam.hpp"
#include "csidn/layer.hpp"
#include "csidn/rng.hpp"
#include "csidn/tensor.hpp"

namespace csidn {

struct AutoencoderSpec {
  std::size_t n_p = 32;
  std::size_t n_t = 32;
  std::size_t n_cw = 256;

  std::size_t input_size() const { return 2 * n_p * n_t; }
  double gamma() const { return static_cast<double>(n_cw) / static_cast<double>(input_size()); }

  void validate() const {
    if (n_p == 0 || n_t == 0) throw ConfigError("autoencoder: n_p and n_t must be positive");
    if (n_cw == 0 || n_cw > input_size()) {
      throw ConfigError("autoencoder: codeword length must satisfy 1 <= n_cw <= 2*n_p*n_t "
                        "(compression ratio gamma = n_cw/(2*n_p*n_t) <= 1), got n_cw=" +
                        std::to_string(n_cw) + " with 2*n_p*n_t=" + std::to_string(input_size()));
    }
  }
};

template <typename T>
class Encoder {
 public:
  Encoder(const AutoencoderSpec& spec, Rng rng)
      : spec_(spec),
        conv_(2, 2, 3, spec.n_p, spec.n_t, rng),
        act_(ActKind::leaky_relu, {2, spec.n_p, spec.n_t}),
        flatten_({2, spec.n_p, spec.n_t}, {spec.input_size()}),
        fc_(spec.input_size(), spec.n_cw, rng) {
    spec.validate();
  }

  /// {batch, 2, n_p, n_t} -> {batch, n_cw}, linear output.
  Tensor<T> forward(const Tensor<T>& h, Mode mode) {
    return fc_.forward(flatten_.forward(act_.forward(conv_.forward(h, mode), mode), mode), mode);
  }

  Tensor<T> backward(const Tensor<T>& ds) {
    return conv_.backward(act_.backward(flatten_.backward(fc_.backward(ds))));
  }

  void set_frozen(bool f) {
    frozen_ = f;
    conv_.set_frozen(f);
    fc_.set_frozen(f);
  }
  bool frozen() const { return frozen_; }

  void zero_grad() {
    conv_.zero_grad();
    fc_.zero_grad();
  }

  ParameterGroup<T> param_group() {
    ParameterGroup<T> g{"encoder", {}, &frozen_};
    conv_.append_params(g.refs, "encoder.conv");
    fc_.append_params(g.refs, "encoder.fc");
    return g;
  }

  std::vector<LayerSpec> layer_specs() const {
    return {conv_.spec(), act_.spec(), flatten_.spec(), fc_.spec()};
  }
  std::vector<LayerBlob> export_blobs() const {
    return {conv_.export_blob(), act_.export_blob(), flatten_.export_blob(), fc_.export_blob()};
  }
  void import_blobs(const std::vector<LayerBlob>& blobs) {
    if (blobs.size() != 4) throw FormatError("encoder: expected 4 layers, got " +
                                             std::to_string(blobs.size()));
    conv_.import_blob(blobs[0]);
    act_.import_blob(blobs[1]);
    flatten_.import_blob(blobs[2]);
    fc_.import_blob(blobs[3]);
  }

  Conv2dLayer<T>& conv() { return conv_; }
  DenseLayer<T>& fc() { return fc_; }
  const AutoencoderSpec& spec() const { return spec_; }

 private:
  AutoencoderSpec spec_;
  Conv2dLayer<T> conv_;
  ActivationLayer<T> act_;
  ReshapeLayer<T> flatten_;
  DenseLayer<T> fc_;
  bool frozen_ = false;
};

// conv(2->8) + leaky, conv(8->16) + leaky, conv(16->2), plus the skip path.
template <typename T>
class RefineBlock {
 public:
  RefineBlock(std::size_t h, std::size_t w, Rng& rng)
      : conv_a_(2, 8, 3, h, w, rng),
        act_a_(ActKind::leaky_relu, {8, h, w}),
        conv_b_(8, 16, 3, h, w, rng),
        act_b_(ActKind::leaky_relu, {16, h, w}),
        conv_c_(16, 2, 3, h, w, rng) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> y = conv_c_.forward(
        act_b_.forward(conv_b_.forward(act_a_.forward(conv_a_.forward(x, mode), mode), mode), mode),
        mode);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx =
        conv_a_.backward(act_a_.backward(conv_b_.backward(act_b_.backward(conv_c_.backward(dy)))));
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    return dx;
  }

  void set_frozen(bool f) {
    conv_a_.set_frozen(f);
    conv_b_.set_frozen(f);
    conv_c_.set_frozen(f);
  }
  void zero_grad() {
    conv_a_.zero_grad();
    conv_b_.zero_grad();
    conv_c_.zero_grad();
  }
  void append_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    conv_a_.append_params(out, prefix + ".conv_a");
    conv_b_.append_params(out, prefix + ".conv_b");
    conv_c_.append_params(out, prefix + ".conv_c");
  }
  void append_specs(std::vector<LayerSpec>& out) const {
    out.push_back(conv_a_.spec());
    out.push_back(act_a_.spec());
    out.push_back(conv_b_.spec());
    out.push_back(act_b_.spec());
    out.push_back(conv_c_.spec());
  }
  void append_blobs(std::vector<LayerBlob>& out) const {
    out.push_back(conv_a_.export_blob());
    out.push_back(act_a_.export_blob());
    out.push_back(conv_b_.export_blob());
    out.push_back(act_b_.export_blob());
    out.push_back(conv_c_.export_blob());
  }
  std::size_t import_blobs(const std::vector<LayerBlob>& blobs, std::size_t pos) {
    conv_a_.import_blob(blobs.at(pos));
    act_a_.import_blob(blobs.at(pos + 1));
    conv_b_.import_blob(blobs.at(pos + 2));
    act_b_.import_blob(blobs.at(pos + 3));
    conv_c_.import_blob(blobs.at(pos + 4));
    return pos + 5;
  }

  Conv2dLayer<T>& conv_a() { return conv_a_; }
  Conv2dLayer<T>& conv_b() { return conv_b_; }
  Conv2dLayer<T>& conv_c() { return conv_c_; }

 private:
  Conv2dLayer<T> conv_a_;
  ActivationLayer<T> act_a_;
  Conv2dLayer<T> conv_b_;
  ActivationLayer<T> act_b_;
  Conv2dLayer<T> conv_c_;
};

template <typename T>
class Decoder {
 public:
  Decoder(const AutoencoderSpec& spec, Rng rng)
      : spec_(spec),
        fc_(spec.n_cw, spec.input_size(), rng),
        unflatten_({spec.input_size()}, {2, spec.n_p, spec.n_t}),
        block1_(spec.n_p, spec.n_t, rng),
        block2_(spec.n_p, spec.n_t, rng),
        out_act_(ActKind::sigmoid, {2, spec.n_p, spec.n_t}) {
    spec.validate();
  }

  /// {batch, n_cw} -> {batch, 2, n_p, n_t}, entries in (0,1).
  Tensor<T> forward(const Tensor<T>& s, Mode mode) {
    Tensor<T> x = unflatten_.forward(fc_.forward(s, mode), mode);
    x = block1_.forward(x, mode);
    x = block2_.forward(x, mode);
    return out_act_.forward(x, mode);
  }

  Tensor<T> backward(const Tensor<T>& dh) {
    Tensor<T> d = out_act_.backward(dh);
    d = block2_.backward(d);
    d = block1_.backward(d);
    return fc_.backward(unflatten_.backward(d));
  }

  void set_frozen(bool f) {
    frozen_ = f;
    fc_.set_frozen(f);
    block1_.set_frozen(f);
    block2_.set_frozen(f);
  }
  bool frozen() const { return frozen_; }

  void zero_grad() {
    fc_.zero_grad();
    block1_.zero_grad();
    block2_.zero_grad();
  }

  ParameterGroup<T> param_group() {
    ParameterGroup<T> g{"decoder", {}, &frozen_};
    fc_.append_params(g.refs, "decoder.fc");
    block1_.append_params(g.refs, "decoder.block1");
    block2_.append_params(g.refs, "decoder.block2");
    return g;
  }

  std::vector<LayerSpec> layer_specs() const {
    std::vector<LayerSpec> specs{fc_.spec(), unflatten_.spec()};
    block1_.append_specs(specs);
    block2_.append_specs(specs);
    specs.push_back(out_act_.spec());
    return specs;
  }
  std::vector<LayerBlob> export_blobs() const {
    std::vector<LayerBlob> blobs{fc_.export_blob(), unflatten_.export_blob()};
    block1_.append_blobs(blobs);
    block2_.append_blobs(blobs);
    blobs.push_back(out_act_.export_blob());
    return blobs;
  }
  void import_blobs(const std::vector<LayerBlob>& blobs) {
    if (blobs.size() != 13) throw FormatError("decoder: expected 13 layers, got " +
                                              std::to_string(blobs.size()));
    fc_.import_blob(blobs[0]);
    unflatten_.import_blob(blobs[1]);
    std::size_t pos = block1_.import_blobs(blobs, 2);
    pos = block2_.import_blobs(blobs, pos);
    out_act_.import_blob(blobs[pos]);
  }

  DenseLayer<T>& fc() { return fc_; }
  RefineBlock<T>& block1() { return block1_; }
  RefineBlock<T>& block2() { return block2_; }
  const AutoencoderSpec& spec() const { return spec_; }

 private:
  AutoencoderSpec spec_;
  DenseLayer<T> fc_;
  ReshapeLayer<T> unflatten_;
  RefineBlock<T> block1_;
  RefineBlock<T> block2_;
  ActivationLayer<T> out_act_;
  bool frozen_ = false;
};

}  // namespace csidn
