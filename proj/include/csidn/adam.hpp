// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "csidn/error.hpp"
#include "csidn/layer.hpp"
#include "csidn/tensor.hpp"

namespace csidn {

// One independently freezable set of parameters (encoder, decoder or
// denoiser). `frozen` points at the owning network's flag.
template <typename T>
struct ParameterGroup {
  std::string name;
  std::vector<ParamRef<T>> refs;
  const bool* frozen = nullptr;

  bool is_frozen() const { return frozen != nullptr && *frozen; }
};

enum class StepStatus { applied, skipped_frozen };

/// ADAM with bias correction. Moments live per bound parameter tensor; the
/// step counter advances only when an update is actually applied.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(ParameterGroup<T> group, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
                T eps = T(1e-8))
      : group_(std::move(group)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(group_.refs.size());
    v_.reserve(group_.refs.size());
    for (const auto& p : group_.refs) {
      m_.emplace_back(p.value->shape());
      v_.emplace_back(p.value->shape());
    }
  }

  StepStatus step() {
    if (group_.is_frozen()) return StepStatus::skipped_frozen;
    ++t_;
    const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1_), t_));
    const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2_), t_));
    for (std::size_t pi = 0; pi < group_.refs.size(); ++pi) {
      Tensor<T>& theta = *group_.refs[pi].value;
      const Tensor<T>& g = *group_.refs[pi].grad;
      Tensor<T>& m = m_[pi];
      Tensor<T>& v = v_[pi];
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        theta[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
    return StepStatus::applied;
  }

  uint64_t steps() const { return t_; }
  const ParameterGroup<T>& group() const { return group_; }

 private:
  ParameterGroup<T> group_;
  T lr_, beta1_, beta2_, eps_;
  uint64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace csidn
