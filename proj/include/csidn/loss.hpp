// SPDX-License-Identifier: Apache-2.0

/**
 * @file loss.hpp
 * @brief Training losses: batch-mean squared error and the KL-divergence
 *        sparsity penalty on hidden activations, with analytic gradients.
 */

#pragma once

#include <cmath>

#include "csidn/error.hpp"
#include "csidn/tensor.hpp"

namespace csidn {

constexpr double kKlClamp = 1e-7;

/// Sum of squared errors per sample, averaged over the batch (first dim).
template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same_shape(pred, target, "mse_loss");
  if (pred.rank() < 1) throw DimensionError("mse_loss: scalar tensors unsupported");
  double acc = 0.0;
  const std::size_t n = pred.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.dim(0));
}

/// d mse / d pred = 2 (pred - target) / batch.
template <typename T>
Tensor<T> mse_loss_grad(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same_shape(pred, target, "mse_loss_grad");
  Tensor<T> g(pred.shape());
  const T scale = T(2) / static_cast<T>(pred.dim(0));
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

namespace detail {

template <typename T>
inline double clamped_mean_activation(const Tensor<T>& acts, std::size_t j) {
  const std::size_t batch = acts.dim(0), f = acts.dim(1);
  double m = 0.0;
  for (std::size_t b = 0; b < batch; ++b) m += acts[b * f + j];
  m /= static_cast<double>(batch);
  return std::min(std::max(m, kKlClamp), 1.0 - kKlClamp);
}

}  // namespace detail

/// Bernoulli KL divergence between the target sparsity factor and the
/// batch-mean activation of each neuron, summed over neurons. Activations
/// are expected post-sigmoid; batch means are clamped away from {0,1}.
template <typename T>
double kl_sparsity(const Tensor<T>& hidden_acts, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ConfigError("kl_sparsity: sparsity factor must lie in (0,1), got " +
                      std::to_string(beta));
  }
  if (hidden_acts.rank() != 2 || hidden_acts.dim(0) < 1) {
    throw DimensionError("kl_sparsity: activations must be [batch x neurons], got " +
                         shape_str(hidden_acts.shape()));
  }
  const std::size_t f = hidden_acts.dim(1);
  double total = 0.0;
  for (std::size_t j = 0; j < f; ++j) {
    const double bh = detail::clamped_mean_activation(hidden_acts, j);
    total += beta * std::log(beta / bh) + (1.0 - beta) * std::log((1.0 - beta) / (1.0 - bh));
  }
  return total;
}

/// d kl / d activation; zero wherever the batch mean is clamped.
template <typename T>
Tensor<T> kl_sparsity_grad(const Tensor<T>& hidden_acts, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ConfigError("kl_sparsity_grad: sparsity factor must lie in (0,1), got " +
                      std::to_string(beta));
  }
  const std::size_t batch = hidden_acts.dim(0), f = hidden_acts.dim(1);
  Tensor<T> g(hidden_acts.shape());
  for (std::size_t j = 0; j < f; ++j) {
    double m = 0.0;
    for (std::size_t b = 0; b < batch; ++b) m += hidden_acts[b * f + j];
    m /= static_cast<double>(batch);
    double dj = 0.0;
    if (m > kKlClamp && m < 1.0 - kKlClamp) {
      dj = (-beta / m + (1.0 - beta) / (1.0 - m)) / static_cast<double>(batch);
    }
    for (std::size_t b = 0; b < batch; ++b) g[b * f + j] = static_cast<T>(dj);
  }
  return g;
}

}  // namespace csidn
