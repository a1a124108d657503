// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "descnet/numerics/tensor.hpp"
#include "descnet/rng.hpp"

namespace descnet::nn {

template <std::floating_point T>
numerics::Tensor<T> uniform_tensor(numerics::Shape shape, double limit, Rng& rng) {
  numerics::Tensor<T> out(std::move(shape));
  for (auto& x : out.values()) x = static_cast<T>(rng.uniform(-limit, limit));
  return out;
}

/// Glorot/Xavier uniform for a (fan_in, fan_out) matrix.
template <std::floating_point T>
numerics::Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_tensor<T>({fan_in, fan_out}, limit, rng);
}

}  // namespace descnet::nn
