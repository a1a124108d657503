// SPDX-License-Identifier: Apache-2.0
#pragma once

// Cross-entropy losses on probabilities. Probabilities are clipped to
// [kProbabilityClip, 1 - kProbabilityClip]; clipped entries pass no gradient.

#include <cmath>
#include <string>

#include "descnet/error.hpp"
#include "descnet/numerics/ops.hpp"

namespace descnet::nn {

inline constexpr double kProbabilityClip = 1e-7;

namespace detail {

template <std::floating_point T>
void check_targets(const numerics::Var<T>& probs, const numerics::Tensor<T>& targets, const char* op) {
  if (probs.shape().size() != 2 || targets.shape() != probs.shape()) {
    throw ShapeError(std::string(op) + ": probabilities " + numerics::shape_string(probs.shape()) +
                               " and targets " + numerics::shape_string(targets.shape()) + " must be equal (B, C)");
  }
}

template <std::floating_point T>
T clip_probability(T p, bool& clipped) {
  const T lo = static_cast<T>(kProbabilityClip);
  const T hi = T(1) - lo;
  clipped = p < lo || p > hi;
  return std::min(std::max(p, lo), hi);
}

}  // namespace detail

/// -sum_j t_j log p_j, averaged over the batch. Targets must be one-hot rows.
template <std::floating_point T>
numerics::Var<T> categorical_cross_entropy(const numerics::Var<T>& probs, const numerics::Tensor<T>& targets) {
  detail::check_targets(probs, targets, "categorical_cross_entropy");
  const std::size_t batch = targets.dim(0), classes = targets.dim(1);
  for (std::size_t b = 0; b < batch; ++b) {
    int ones = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      const T t = targets[b * classes + j];
      if (t == T(1)) {
        ++ones;
      } else if (t != T(0)) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) throw InputError("categorical_cross_entropy: target row " + std::to_string(b) + " is not one-hot");
  }
  T total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == T(0)) continue;
    bool clipped = false;
    total -= targets[i] * std::log(detail::clip_probability(probs.value()[i], clipped));
  }
  const T inv_batch = T(1) / static_cast<T>(batch);
  return probs.tape()->record(numerics::Tensor<T>::scalar(total * inv_batch), {probs},
                              [probs, targets, inv_batch](numerics::Node<T>* self) {
                                return [probs, targets, inv_batch, self] {
                                  auto& g = probs.node()->adjoint();
                                  const T up = self->grad[0] * inv_batch;
                                  for (std::size_t i = 0; i < targets.size(); ++i) {
                                    if (targets[i] == T(0)) continue;
                                    bool clipped = false;
                                    const T p = detail::clip_probability(probs.value()[i], clipped);
                                    if (!clipped) g[i] -= up * targets[i] / p;
                                  }
                                };
                              });
}

/// -(1/C) sum_j [t_j log p_j + (1 - t_j) log(1 - p_j)], averaged over the batch.
template <std::floating_point T>
numerics::Var<T> binary_cross_entropy(const numerics::Var<T>& probs, const numerics::Tensor<T>& targets) {
  detail::check_targets(probs, targets, "binary_cross_entropy");
  const std::size_t batch = targets.dim(0), classes = targets.dim(1);
  T total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    bool clipped = false;
    const T p = detail::clip_probability(probs.value()[i], clipped);
    const T t = targets[i];
    total -= t * std::log(p) + (T(1) - t) * std::log(T(1) - p);
  }
  const T norm = T(1) / static_cast<T>(batch * classes);
  return probs.tape()->record(numerics::Tensor<T>::scalar(total * norm), {probs},
                              [probs, targets, norm](numerics::Node<T>* self) {
                                return [probs, targets, norm, self] {
                                  auto& g = probs.node()->adjoint();
                                  const T up = self->grad[0] * norm;
                                  for (std::size_t i = 0; i < targets.size(); ++i) {
                                    bool clipped = false;
                                    const T p = detail::clip_probability(probs.value()[i], clipped);
                                    if (clipped) continue;
                                    const T t = targets[i];
                                    g[i] += up * (-t / p + (T(1) - t) / (T(1) - p));
                                  }
                                };
                              });
}

}  // namespace descnet::nn
