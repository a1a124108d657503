// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <string>

#include "descnet/error.hpp"
#include "descnet/numerics/tape.hpp"

namespace descnet::numerics {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

namespace detail {

template <std::floating_point T>
void require_finite_gradient(const Parameter<T>& p) {
  for (T g : p.grad.values()) {
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
  }
}

}  // namespace detail

/// One bias-corrected Adam update of every trainable parameter. `step_count`
/// is the 1-based index of this update.
template <std::floating_point T>
void adam_step(std::span<Parameter<T>* const> params, const AdamOptions& options, long step_count) {
  if (step_count < 1) throw InputError("adam_step: step_count must be >= 1");
  for (const auto* p : params) {
    if (p->trainable) detail::require_finite_gradient(*p);
  }
  const double correction1 = 1.0 - std::pow(options.beta1, static_cast<double>(step_count));
  const double correction2 = 1.0 - std::pow(options.beta2, static_cast<double>(step_count));
  const T lr = static_cast<T>(options.learning_rate * std::sqrt(correction2) / correction1);
  const T b1 = static_cast<T>(options.beta1), b2 = static_cast<T>(options.beta2);
  // epsilon applied to the bias-corrected second moment, rescaled to the raw one
  const T eps = static_cast<T>(options.epsilon * std::sqrt(correction2));
  for (auto* p : params) {
    if (!p->trainable) continue;
    T* w = p->value.data();
    T* m = p->moment1.data();
    T* v = p->moment2.data();
    const T* g = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      w[i] -= lr * m[i] / (std::sqrt(v[i]) + eps);
    }
  }
}

/// Plain gradient descent.
template <std::floating_point T>
void sgd_step(std::span<Parameter<T>* const> params, double learning_rate) {
  for (const auto* p : params) {
    if (p->trainable) detail::require_finite_gradient(*p);
  }
  const T lr = static_cast<T>(learning_rate);
  for (auto* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->grad[i];
  }
}

}  // namespace descnet::numerics
