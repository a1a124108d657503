// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "descnet/error.hpp"
#include "descnet/numerics/ops.hpp"
#include "descnet/rng.hpp"

namespace descnet::nn {

/// Inverted-dropout mask: 0 with probability `rate`, else 1 / (1 - rate).
template <std::floating_point T>
numerics::Tensor<T> dropout_mask(numerics::Shape shape, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InputError("dropout rate must lie in [0, 1)");
  numerics::Tensor<T> mask(std::move(shape));
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask.values()) m = rng.uniform() < rate ? T(0) : keep;
  return mask;
}

/// Identity at inference or rate 0; inverted dropout while training.
template <std::floating_point T>
numerics::Var<T> dropout(const numerics::Var<T>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InputError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  return numerics::mul(x, x.tape()->constant(dropout_mask<T>(x.shape(), rate, rng)));
}

}  // namespace descnet::nn
