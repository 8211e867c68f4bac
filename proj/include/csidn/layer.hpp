// SPDX-License-Identifier: Apache-2.0

/**
 * @file layer.hpp
 * @brief The five layer kinds used by the feedback pipeline (dense, conv2d,
 *        batchnorm, activation, reshape), each with a hand-written reverse
 *        pass. Gradients are verified against central finite differences in
 *        the test suite.
 *
 * Layers cache what their backward pass needs during forward; backward
 * consumes the cache of the most recent forward. Parameter gradients
 * accumulate until zero_grad(). A frozen layer still propagates input
 * gradients but accumulates no parameter gradient, and its batch-norm
 * statistics stop updating.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "csidn/error.hpp"
#include "csidn/kernels.hpp"
#include "csidn/rng.hpp"
#include "csidn/tensor.hpp"

namespace csidn {

enum class Mode { train, infer };

enum class LayerKind : uint8_t {
  dense = 0,
  conv2d = 1,
  batchnorm = 2,
  activation = 3,
  reshape = 4,
};

enum class ActKind : uint8_t { sigmoid = 0, leaky_relu = 1 };

inline ActKind activation_from_name(const std::string& name) {
  if (name == "sigmoid") return ActKind::sigmoid;
  if (name == "leaky_relu") return ActKind::leaky_relu;
  throw ConfigError("unknown activation '" + name + "' (supported: sigmoid, leaky_relu)");
}

constexpr double kLeakyReluSlope = 0.3;
constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.99;
constexpr double kWeightInitStddev = 0.02;

// Geometry descriptor for one layer; drives validation, serialization and
// the multiply-accumulate estimate.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Shape input_dims;   // per-sample dims, batch excluded
  Shape output_dims;
  std::size_t kernel = 0;        // conv2d
  std::size_t in_channels = 0;   // conv2d
  std::size_t out_channels = 0;  // conv2d
  ActKind act = ActKind::sigmoid;

  void validate() const {
    switch (kind) {
      case LayerKind::dense:
        if (input_dims.size() != 1 || output_dims.size() != 1) {
          throw ConfigError("dense layer dims must be rank-1, got " + shape_str(input_dims) +
                            " -> " + shape_str(output_dims));
        }
        break;
      case LayerKind::conv2d:
        if (kernel % 2 == 0 || kernel == 0) {
          throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(kernel));
        }
        if (input_dims.size() != 3 || output_dims.size() != 3 ||
            input_dims[0] != in_channels || output_dims[0] != out_channels ||
            input_dims[1] != output_dims[1] || input_dims[2] != output_dims[2]) {
          throw ConfigError("conv2d with same-padding must preserve spatial dims: " +
                            shape_str(input_dims) + " -> " + shape_str(output_dims));
        }
        break;
      case LayerKind::batchnorm:
      case LayerKind::activation:
        if (input_dims != output_dims) {
          throw ConfigError("elementwise layer must preserve dims: " + shape_str(input_dims) +
                            " -> " + shape_str(output_dims));
        }
        break;
      case LayerKind::reshape:
        if (shape_numel(input_dims) != shape_numel(output_dims)) {
          throw ConfigError("reshape must preserve element count: " + shape_str(input_dims) +
                            " -> " + shape_str(output_dims));
        }
        break;
    }
  }
};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

inline bool spec_equal(const LayerSpec& a, const LayerSpec& b) {
  return a.kind == b.kind && a.input_dims == b.input_dims && a.output_dims == b.output_dims &&
         a.kernel == b.kernel && a.in_channels == b.in_channels &&
         a.out_channels == b.out_channels && a.act == b.act;
}

// Serialized form of one layer: its geometry plus every persisted tensor
// (parameters and, for batch norm, running statistics) as f32.
struct LayerBlob {
  LayerSpec spec;
  std::vector<float> payload;
};

namespace detail {

template <typename T>
void append_f32(std::vector<float>& out, const Tensor<T>& t) {
  for (std::size_t i = 0; i < t.size(); ++i) out.push_back(static_cast<float>(t[i]));
}

template <typename T>
std::size_t read_f32(const std::vector<float>& in, std::size_t pos, Tensor<T>& t) {
  if (pos + t.size() > in.size()) throw FormatError("layer payload shorter than expected");
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(in[pos + i]);
  return pos + t.size();
}

inline void check_blob(const LayerBlob& blob, const LayerSpec& expect, std::size_t payload_len,
                       const char* what) {
  if (!spec_equal(blob.spec, expect)) {
    throw FormatError(std::string(what) + ": layer geometry mismatch (" +
                      shape_str(blob.spec.input_dims) + "->" + shape_str(blob.spec.output_dims) +
                      " vs expected " + shape_str(expect.input_dims) + "->" +
                      shape_str(expect.output_dims) + ")");
  }
  if (blob.payload.size() != payload_len) {
    throw FormatError(std::string(what) + ": payload length " +
                      std::to_string(blob.payload.size()) + " vs expected " +
                      std::to_string(payload_len));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raw forward operations (also used by the test oracles' counterparts).
// ---------------------------------------------------------------------------

/// y[b,:] = W x[b,:] + b for W [out x in], x [batch x in]. The weight is
/// streamed once per batch (not once per sample): transposed-weight rows
/// in the outer loop, batch rows inner, so the output block stays cached.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& w, const Tensor<T>& b, const Tensor<T>& z) {
  if (w.rank() != 2 || z.rank() != 2 || w.dim(1) != z.dim(1)) {
    throw DimensionError("dense_forward: weight " + shape_str(w.shape()) +
                         " incompatible with input " + shape_str(z.shape()));
  }
  const std::size_t out = w.dim(0), in = w.dim(1), batch = z.dim(0);
  if (b.size() != out) {
    throw DimensionError("dense_forward: bias " + shape_str(b.shape()) + " vs weight " +
                         shape_str(w.shape()));
  }
  Tensor<T> wt({in, out});
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i) wt[i * out + o] = w[o * in + i];

  Tensor<T> y({batch, out});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    T* yrow = y.data() + bi * out;
    for (std::size_t o = 0; o < out; ++o) yrow[o] = b[o];
  }
  for (std::size_t i = 0; i < in; ++i) {
    const T* wrow = wt.data() + i * out;
    for (std::size_t bi = 0; bi < batch; ++bi) {
      axpy(y.data() + bi * out, wrow, z[bi * in + i], out);
    }
  }
  return y;
}

template <typename T>
inline T sigmoid_scalar(T x) {
  T y;
  if (x >= T(0)) {
    const T e = std::exp(-x);
    y = T(1) / (T(1) + e);
  } else {
    const T e = std::exp(x);
    y = e / (T(1) + e);
  }
  // Keep strictly inside (0,1) so downstream logs stay finite.
  const T lo = std::numeric_limits<T>::min();
  const T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  return std::min(std::max(y, lo), hi);
}

template <typename T>
Tensor<T> activation_forward(ActKind kind, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::size_t n = x.size();
  if (kind == ActKind::sigmoid) {
    for (std::size_t i = 0; i < n; ++i) y[i] = sigmoid_scalar(x[i]);
  } else {
    const T slope = T(kLeakyReluSlope);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
  }
  return y;
}

template <typename T>
Tensor<T> activation_forward(const std::string& name, const Tensor<T>& x) {
  return activation_forward(activation_from_name(name), x);
}

namespace detail {

// Cross-correlation with zero same-padding, accumulated into `out`.
template <typename T>
void conv2d_accumulate(const Tensor<T>& kernel, const Tensor<T>& input, Tensor<T>& out) {
  const std::size_t oc_n = kernel.dim(0), ic_n = kernel.dim(1), k = kernel.dim(2);
  const std::size_t batch = input.dim(0), h = input.dim(2), w = input.dim(3);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const std::ptrdiff_t hh = static_cast<std::ptrdiff_t>(h), ww = static_cast<std::ptrdiff_t>(w);

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oc = 0; oc < oc_n; ++oc) {
      T* outp = out.data() + ((b * oc_n + oc) * h) * w;
      for (std::size_t ic = 0; ic < ic_n; ++ic) {
        const T* inp = input.data() + ((b * ic_n + ic) * h) * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const T wgt = kernel[((oc * ic_n + ic) * k + ky) * k + kx];
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
            const std::ptrdiff_t ylo = std::max<std::ptrdiff_t>(0, -dy);
            const std::ptrdiff_t yhi = std::min<std::ptrdiff_t>(hh, hh - dy);
            const std::ptrdiff_t xlo = std::max<std::ptrdiff_t>(0, -dx);
            const std::ptrdiff_t xhi = std::min<std::ptrdiff_t>(ww, ww - dx);
            if (xhi <= xlo) continue;
            for (std::ptrdiff_t y = ylo; y < yhi; ++y) {
              axpy(outp + y * ww + xlo, inp + (y + dy) * ww + (xlo + dx), wgt,
                   static_cast<std::size_t>(xhi - xlo));
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Cross-correlation, stride 1, zero same-padding of (k-1)/2, no bias.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& kernel, const Tensor<T>& input) {
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3)) {
    throw DimensionError("conv2d_forward: kernel must be [outC x inC x k x k], got " +
                         shape_str(kernel.shape()));
  }
  if (kernel.dim(2) % 2 == 0) {
    throw ConfigError("conv2d_forward: kernel size must be odd, got " +
                      std::to_string(kernel.dim(2)));
  }
  if (input.rank() != 4 || input.dim(1) != kernel.dim(1)) {
    throw DimensionError("conv2d_forward: input " + shape_str(input.shape()) +
                         " incompatible with kernel " + shape_str(kernel.shape()));
  }
  Tensor<T> out({input.dim(0), kernel.dim(0), input.dim(2), input.dim(3)});
  detail::conv2d_accumulate(kernel, input, out);
  return out;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename T>
class DenseLayer {
 public:
  DenseLayer(std::size_t in, std::size_t out, Rng& rng)
      : w_({out, in}), b_({out}), dw_({out, in}), db_({out}) {
    spec_.kind = LayerKind::dense;
    spec_.input_dims = {in};
    spec_.output_dims = {out};
    for (std::size_t i = 0; i < w_.size(); ++i) {
      w_[i] = static_cast<T>(rng.truncated_normal(kWeightInitStddev));
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode /*mode*/) {
    x_cache_ = x;
    has_cache_ = true;
    return dense_forward(w_, b_, x);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!has_cache_) throw StateError("dense backward before forward");
    const std::size_t out = w_.dim(0), in = w_.dim(1), batch = x_cache_.dim(0);
    if (dy.rank() != 2 || dy.dim(0) != batch || dy.dim(1) != out) {
      throw DimensionError("dense backward: gradient " + shape_str(dy.shape()) +
                           " vs output [" + std::to_string(batch) + "x" + std::to_string(out) + "]");
    }
    // Weight-row outer loops keep the large matrices streaming once per
    // batch while the batch-sized blocks stay cached.
    Tensor<T> dx({batch, in});
    for (std::size_t o = 0; o < out; ++o) {
      const T* wrow = w_.data() + o * in;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        axpy(dx.data() + bi * in, wrow, dy[bi * out + o], in);
      }
    }
    if (!frozen_) {
      for (std::size_t o = 0; o < out; ++o) {
        T* dwrow = dw_.data() + o * in;
        T bsum = 0;
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const T g = dy[bi * out + o];
          axpy(dwrow, x_cache_.data() + bi * in, g, in);
          bsum += g;
        }
        db_[o] += bsum;
      }
    }
    return dx;
  }

  const LayerSpec& spec() const { return spec_; }
  Tensor<T>& weight() { return w_; }
  Tensor<T>& bias() { return b_; }
  const Tensor<T>& weight() const { return w_; }
  const Tensor<T>& bias() const { return b_; }

  void set_frozen(bool f) { frozen_ = f; }
  void zero_grad() {
    dw_.zero();
    db_.zero();
  }
  void append_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &w_, &dw_});
    out.push_back({prefix + ".bias", &b_, &db_});
  }
  void append_state(std::vector<Tensor<T>*>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
  }
  LayerBlob export_blob() const {
    LayerBlob blob{spec_, {}};
    detail::append_f32(blob.payload, w_);
    detail::append_f32(blob.payload, b_);
    return blob;
  }
  void import_blob(const LayerBlob& blob) {
    detail::check_blob(blob, spec_, w_.size() + b_.size(), "dense");
    std::size_t pos = detail::read_f32(blob.payload, 0, w_);
    detail::read_f32(blob.payload, pos, b_);
  }

 private:
  LayerSpec spec_;
  Tensor<T> w_, b_, dw_, db_;
  Tensor<T> x_cache_;
  bool has_cache_ = false;
  bool frozen_ = false;
};

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t h, std::size_t w,
              Rng& rng)
      : k_({out_ch, in_ch, k, k}), b_({out_ch}), dk_({out_ch, in_ch, k, k}), db_({out_ch}) {
    if (k % 2 == 0) throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(k));
    spec_.kind = LayerKind::conv2d;
    spec_.kernel = k;
    spec_.in_channels = in_ch;
    spec_.out_channels = out_ch;
    spec_.input_dims = {in_ch, h, w};
    spec_.output_dims = {out_ch, h, w};
    for (std::size_t i = 0; i < k_.size(); ++i) {
      k_[i] = static_cast<T>(rng.truncated_normal(kWeightInitStddev));
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode /*mode*/) {
    check_input(x);
    x_cache_ = x;
    has_cache_ = true;
    const std::size_t batch = x.dim(0), oc_n = k_.dim(0), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({batch, oc_n, h, w});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t oc = 0; oc < oc_n; ++oc) {
        T* p = y.data() + ((b * oc_n + oc) * h) * w;
        std::fill(p, p + h * w, b_[oc]);
      }
    detail::conv2d_accumulate(k_, x, y);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!has_cache_) throw StateError("conv2d backward before forward");
    const std::size_t batch = x_cache_.dim(0), ic_n = k_.dim(1), oc_n = k_.dim(0);
    const std::size_t k = k_.dim(2), h = x_cache_.dim(2), w = x_cache_.dim(3);
    if (dy.rank() != 4 || dy.dim(0) != batch || dy.dim(1) != oc_n || dy.dim(2) != h ||
        dy.dim(3) != w) {
      throw DimensionError("conv2d backward: gradient " + shape_str(dy.shape()));
    }
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    const std::ptrdiff_t hh = static_cast<std::ptrdiff_t>(h), ww = static_cast<std::ptrdiff_t>(w);
    Tensor<T> dx(x_cache_.shape());

    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t oc = 0; oc < oc_n; ++oc) {
        const T* dyp = dy.data() + ((b * oc_n + oc) * h) * w;
        if (!frozen_) {
          T bsum = 0;
          for (std::size_t i = 0; i < h * w; ++i) bsum += dyp[i];
          db_[oc] += bsum;
        }
        for (std::size_t ic = 0; ic < ic_n; ++ic) {
          const T* inp = x_cache_.data() + ((b * ic_n + ic) * h) * w;
          T* dxp = dx.data() + ((b * ic_n + ic) * h) * w;
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::size_t kidx = ((oc * ic_n + ic) * k + ky) * k + kx;
              const T wgt = k_[kidx];
              const std::ptrdiff_t dyo = static_cast<std::ptrdiff_t>(ky) - pad;
              const std::ptrdiff_t dxo = static_cast<std::ptrdiff_t>(kx) - pad;
              const std::ptrdiff_t ylo = std::max<std::ptrdiff_t>(0, -dyo);
              const std::ptrdiff_t yhi = std::min<std::ptrdiff_t>(hh, hh - dyo);
              const std::ptrdiff_t xlo = std::max<std::ptrdiff_t>(0, -dxo);
              const std::ptrdiff_t xhi = std::min<std::ptrdiff_t>(ww, ww - dxo);
              if (xhi <= xlo) continue;
              T ksum = 0;
              for (std::ptrdiff_t y = ylo; y < yhi; ++y) {
                const std::size_t len = static_cast<std::size_t>(xhi - xlo);
                axpy(dxp + (y + dyo) * ww + (xlo + dxo), dyp + y * ww + xlo, wgt, len);
                if (!frozen_) {
                  ksum += dot(dyp + y * ww + xlo, inp + (y + dyo) * ww + (xlo + dxo), len);
                }
              }
              if (!frozen_) dk_[kidx] += ksum;
            }
          }
        }
      }
    }
    return dx;
  }

  const LayerSpec& spec() const { return spec_; }
  Tensor<T>& kernel() { return k_; }
  Tensor<T>& bias() { return b_; }

  void set_frozen(bool f) { frozen_ = f; }
  void zero_grad() {
    dk_.zero();
    db_.zero();
  }
  void append_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".kernel", &k_, &dk_});
    out.push_back({prefix + ".bias", &b_, &db_});
  }
  void append_state(std::vector<Tensor<T>*>& out) {
    out.push_back(&k_);
    out.push_back(&b_);
  }
  LayerBlob export_blob() const {
    LayerBlob blob{spec_, {}};
    detail::append_f32(blob.payload, k_);
    detail::append_f32(blob.payload, b_);
    return blob;
  }
  void import_blob(const LayerBlob& blob) {
    detail::check_blob(blob, spec_, k_.size() + b_.size(), "conv2d");
    std::size_t pos = detail::read_f32(blob.payload, 0, k_);
    detail::read_f32(blob.payload, pos, b_);
  }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != spec_.in_channels || x.dim(2) != spec_.input_dims[1] ||
        x.dim(3) != spec_.input_dims[2]) {
      throw DimensionError("conv2d: input " + shape_str(x.shape()) + " does not match layer " +
                           shape_str(spec_.input_dims));
    }
  }

  LayerSpec spec_;
  Tensor<T> k_, b_, dk_, db_;
  Tensor<T> x_cache_;
  bool has_cache_ = false;
  bool frozen_ = false;
};

// Per-feature batch normalization over the batch dimension, with running
// statistics for inference. A frozen layer always runs in inference mode.
template <typename T>
class BatchNormLayer {
 public:
  explicit BatchNormLayer(std::size_t features)
      : scale_({features}, T(1)),
        shift_({features}),
        dscale_({features}),
        dshift_({features}),
        running_mean_({features}),
        running_var_({features}, T(1)) {
    spec_.kind = LayerKind::batchnorm;
    spec_.input_dims = {features};
    spec_.output_dims = {features};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    const std::size_t f = features();
    if (x.rank() != 2 || x.dim(1) != f) {
      throw DimensionError("batchnorm: input " + shape_str(x.shape()) + " vs features " +
                           std::to_string(f));
    }
    const std::size_t batch = x.dim(0);
    if (frozen_) mode = Mode::infer;
    if (mode == Mode::train && batch < 2) {
      throw DimensionError("batchnorm: train mode requires batch >= 2, got batch " +
                           std::to_string(batch));
    }
    train_cache_ = (mode == Mode::train);
    has_cache_ = true;

    Tensor<T> y({batch, f});
    inv_std_ = Tensor<T>({f});
    if (mode == Mode::train) {
      std::vector<double> mean(f, 0.0), var(f, 0.0);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = x.data() + b * f;
        for (std::size_t j = 0; j < f; ++j) mean[j] += row[j];
      }
      for (std::size_t j = 0; j < f; ++j) mean[j] /= batch;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = x.data() + b * f;
        for (std::size_t j = 0; j < f; ++j) {
          const double d = row[j] - mean[j];
          var[j] += d * d;
        }
      }
      for (std::size_t j = 0; j < f; ++j) var[j] /= batch;

      xhat_ = Tensor<T>({batch, f});
      for (std::size_t j = 0; j < f; ++j) {
        inv_std_[j] = static_cast<T>(1.0 / std::sqrt(var[j] + kBatchNormEps));
      }
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = x.data() + b * f;
        T* xh = xhat_.data() + b * f;
        T* yr = y.data() + b * f;
        for (std::size_t j = 0; j < f; ++j) {
          xh[j] = (row[j] - static_cast<T>(mean[j])) * inv_std_[j];
          yr[j] = scale_[j] * xh[j] + shift_[j];
        }
      }
      const T mom = T(kBatchNormMomentum);
      for (std::size_t j = 0; j < f; ++j) {
        running_mean_[j] = mom * running_mean_[j] + (T(1) - mom) * static_cast<T>(mean[j]);
        running_var_[j] = mom * running_var_[j] + (T(1) - mom) * static_cast<T>(var[j]);
      }
    } else {
      for (std::size_t j = 0; j < f; ++j) {
        inv_std_[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[j]) +
                                                     kBatchNormEps));
      }
      xhat_ = Tensor<T>({batch, f});
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = x.data() + b * f;
        T* xh = xhat_.data() + b * f;
        T* yr = y.data() + b * f;
        for (std::size_t j = 0; j < f; ++j) {
          xh[j] = (row[j] - running_mean_[j]) * inv_std_[j];
          yr[j] = scale_[j] * xh[j] + shift_[j];
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!has_cache_) throw StateError("batchnorm backward before forward");
    check_same_shape(dy, xhat_, "batchnorm backward");
    const std::size_t batch = dy.dim(0), f = features();
    Tensor<T> dx({batch, f});

    if (!train_cache_) {
      // Inference statistics are constants; the map is affine.
      for (std::size_t b = 0; b < batch; ++b) {
        const T* dyr = dy.data() + b * f;
        T* dxr = dx.data() + b * f;
        const T* xh = xhat_.data() + b * f;
        for (std::size_t j = 0; j < f; ++j) {
          dxr[j] = dyr[j] * scale_[j] * inv_std_[j];
          if (!frozen_) {
            dscale_[j] += dyr[j] * xh[j];
            dshift_[j] += dyr[j];
          }
        }
      }
      return dx;
    }

    // Train mode: account for the dependence of batch mean/var on x.
    std::vector<double> sum_dxhat(f, 0.0), sum_dxhat_xhat(f, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const T* dyr = dy.data() + b * f;
      const T* xh = xhat_.data() + b * f;
      for (std::size_t j = 0; j < f; ++j) {
        const double dxh = static_cast<double>(dyr[j]) * scale_[j];
        sum_dxhat[j] += dxh;
        sum_dxhat_xhat[j] += dxh * xh[j];
        if (!frozen_) {
          dscale_[j] += dyr[j] * xh[j];
          dshift_[j] += dyr[j];
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const T* dyr = dy.data() + b * f;
      const T* xh = xhat_.data() + b * f;
      T* dxr = dx.data() + b * f;
      for (std::size_t j = 0; j < f; ++j) {
        const double dxh = static_cast<double>(dyr[j]) * scale_[j];
        const double v =
            inv_n * inv_std_[j] *
            (batch * dxh - sum_dxhat[j] - static_cast<double>(xh[j]) * sum_dxhat_xhat[j]);
        dxr[j] = static_cast<T>(v);
      }
    }
    return dx;
  }

  std::size_t features() const { return spec_.input_dims[0]; }
  const LayerSpec& spec() const { return spec_; }
  Tensor<T>& scale() { return scale_; }
  Tensor<T>& shift() { return shift_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

  void set_frozen(bool f) { frozen_ = f; }
  void zero_grad() {
    dscale_.zero();
    dshift_.zero();
  }
  void append_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    out.push_back({prefix + ".scale", &scale_, &dscale_});
    out.push_back({prefix + ".shift", &shift_, &dshift_});
  }
  void append_state(std::vector<Tensor<T>*>& out) {
    out.push_back(&scale_);
    out.push_back(&shift_);
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
  }
  LayerBlob export_blob() const {
    LayerBlob blob{spec_, {}};
    detail::append_f32(blob.payload, scale_);
    detail::append_f32(blob.payload, shift_);
    detail::append_f32(blob.payload, running_mean_);
    detail::append_f32(blob.payload, running_var_);
    return blob;
  }
  void import_blob(const LayerBlob& blob) {
    detail::check_blob(blob, spec_, 4 * features(), "batchnorm");
    std::size_t pos = detail::read_f32(blob.payload, 0, scale_);
    pos = detail::read_f32(blob.payload, pos, shift_);
    pos = detail::read_f32(blob.payload, pos, running_mean_);
    detail::read_f32(blob.payload, pos, running_var_);
  }

 private:
  LayerSpec spec_;
  Tensor<T> scale_, shift_, dscale_, dshift_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_, inv_std_;
  bool train_cache_ = false;
  bool has_cache_ = false;
  bool frozen_ = false;
};

template <typename T>
class ActivationLayer {
 public:
  ActivationLayer(ActKind kind, Shape dims) {
    spec_.kind = LayerKind::activation;
    spec_.act = kind;
    spec_.input_dims = dims;
    spec_.output_dims = std::move(dims);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode /*mode*/) {
    Tensor<T> y = activation_forward(spec_.act, x);
    cache_ = (spec_.act == ActKind::sigmoid) ? y : x;  // sigmoid grad needs y, leaky needs x
    has_cache_ = true;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (!has_cache_) throw StateError("activation backward before forward");
    check_same_shape(dy, cache_, "activation backward");
    Tensor<T> dx(dy.shape());
    const std::size_t n = dy.size();
    if (spec_.act == ActKind::sigmoid) {
      for (std::size_t i = 0; i < n; ++i) {
        const T y = cache_[i];
        dx[i] = dy[i] * y * (T(1) - y);
      }
    } else {
      const T slope = T(kLeakyReluSlope);
      for (std::size_t i = 0; i < n; ++i) {
        dx[i] = dy[i] * (cache_[i] >= T(0) ? T(1) : slope);
      }
    }
    return dx;
  }

  const LayerSpec& spec() const { return spec_; }
  void set_frozen(bool) {}
  void zero_grad() {}
  void append_params(std::vector<ParamRef<T>>&, const std::string&) {}
  void append_state(std::vector<Tensor<T>*>&) {}
  LayerBlob export_blob() const { return {spec_, {}}; }
  void import_blob(const LayerBlob& blob) { detail::check_blob(blob, spec_, 0, "activation"); }

 private:
  LayerSpec spec_;
  Tensor<T> cache_;
  bool has_cache_ = false;
};

template <typename T>
class ReshapeLayer {
 public:
  ReshapeLayer(Shape in_dims, Shape out_dims) {
    spec_.kind = LayerKind::reshape;
    spec_.input_dims = std::move(in_dims);
    spec_.output_dims = std::move(out_dims);
    spec_.validate();
  }

  Tensor<T> forward(const Tensor<T>& x, Mode /*mode*/) {
    Shape want = spec_.input_dims;
    want.insert(want.begin(), x.dim(0));
    if (x.shape() != want) {
      throw DimensionError("reshape: input " + shape_str(x.shape()) + " vs expected " +
                           shape_str(want));
    }
    Shape out = spec_.output_dims;
    out.insert(out.begin(), x.dim(0));
    return x.reshaped(std::move(out));
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Shape in = spec_.input_dims;
    in.insert(in.begin(), dy.dim(0));
    return dy.reshaped(std::move(in));
  }

  const LayerSpec& spec() const { return spec_; }
  void set_frozen(bool) {}
  void zero_grad() {}
  void append_params(std::vector<ParamRef<T>>&, const std::string&) {}
  void append_state(std::vector<Tensor<T>*>&) {}
  LayerBlob export_blob() const { return {spec_, {}}; }
  void import_blob(const LayerBlob& blob) { detail::check_blob(blob, spec_, 0, "reshape"); }

 private:
  LayerSpec spec_;
};

}  // namespace csidn
