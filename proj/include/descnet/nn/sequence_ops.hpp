// SPDX-License-Identifier: Apache-2.0
#pragma once

// Length-aware operations over time-major batches of shape (L, B, D).
// Example b occupies timesteps [0, lengths[b]); later positions are padding
// and never contribute to outputs or receive adjoints.

#include <limits>
#include <span>
#include <vector>

#include "descnet/numerics/ops.hpp"

namespace descnet::nn {

using numerics::Node;
using numerics::Shape;
using numerics::Tensor;
using numerics::Var;

namespace detail {

inline void check_lengths(const Shape& shape, std::span<const std::size_t> lengths, const char* op) {
  if (shape.size() < 2 || shape[1] != lengths.size()) {
    throw ShapeError(std::string(op) + ": shape " + numerics::shape_string(shape) + " does not match " +
                     std::to_string(lengths.size()) + " lengths");
  }
  for (auto len : lengths) {
    if (len > shape[0]) throw ShapeError(std::string(op) + ": length " + std::to_string(len) + " exceeds sequence length");
  }
}

}  // namespace detail

/// Reverses each example's valid prefix in time; padding stays zero.
template <std::floating_point T>
Var<T> time_reverse(const Var<T>& x, std::span<const std::size_t> lengths) {
  detail::check_lengths(x.shape(), lengths, "time_reverse");
  const std::size_t steps = x.shape()[0], batch = x.shape()[1];
  const std::size_t width = x.value().size() / (steps * batch);
  Tensor<T> out(x.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const std::size_t src = ((lengths[b] - 1 - t) * batch + b) * width;
      std::copy_n(x.value().data() + src, width, out.data() + (t * batch + b) * width);
    }
  }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return x.tape()->record(std::move(out), {x}, [x, lens, batch, width](Node<T>* self) {
    return [x, lens, batch, width, self] {
      auto& gx = x.node()->adjoint();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < lens[b]; ++t) {
          T* dst = gx.data() + ((lens[b] - 1 - t) * batch + b) * width;
          const T* src = self->grad.data() + (t * batch + b) * width;
          for (std::size_t k = 0; k < width; ++k) dst[k] += src[k];
        }
      }
    };
  });
}

/// Per-feature maximum over valid timesteps: (L, B, D) -> (B, D). Zero for empty examples.
template <std::floating_point T>
Var<T> max_pool_time(const Var<T>& x, std::span<const std::size_t> lengths) {
  detail::check_lengths(x.shape(), lengths, "max_pool_time");
  const std::size_t batch = x.shape()[1], width = x.shape()[2];
  Tensor<T> out(Shape{batch, width});
  std::vector<std::size_t> arg(batch * width, std::numeric_limits<std::size_t>::max());
  for (std::size_t b = 0; b < batch; ++b) {
    if (lengths[b] == 0) continue;
    for (std::size_t k = 0; k < width; ++k) {
      std::size_t best = b * width + k;
      for (std::size_t t = 1; t < lengths[b]; ++t) {
        const std::size_t i = (t * batch + b) * width + k;
        if (x.value()[i] > x.value()[best]) best = i;
      }
      out[b * width + k] = x.value()[best];
      arg[b * width + k] = best;
    }
  }
  return x.tape()->record(std::move(out), {x}, [x, arg](Node<T>* self) {
    return [x, arg, self] {
      auto& gx = x.node()->adjoint();
      for (std::size_t i = 0; i < arg.size(); ++i) {
        if (arg[i] != std::numeric_limits<std::size_t>::max()) gx[arg[i]] += self->grad[i];
      }
    };
  });
}

/// Per-feature mean over valid timesteps: (L, B, D) -> (B, D). Zero for empty examples.
template <std::floating_point T>
Var<T> avg_pool_time(const Var<T>& x, std::span<const std::size_t> lengths) {
  detail::check_lengths(x.shape(), lengths, "avg_pool_time");
  const std::size_t batch = x.shape()[1], width = x.shape()[2];
  Tensor<T> out(Shape{batch, width});
  for (std::size_t b = 0; b < batch; ++b) {
    if (lengths[b] == 0) continue;
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const T* row = x.value().data() + (t * batch + b) * width;
      for (std::size_t k = 0; k < width; ++k) out[b * width + k] += row[k];
    }
    const T inv = T(1) / static_cast<T>(lengths[b]);
    for (std::size_t k = 0; k < width; ++k) out[b * width + k] *= inv;
  }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return x.tape()->record(std::move(out), {x}, [x, lens, batch, width](Node<T>* self) {
    return [x, lens, batch, width, self] {
      auto& gx = x.node()->adjoint();
      for (std::size_t b = 0; b < batch; ++b) {
        if (lens[b] == 0) continue;
        const T inv = T(1) / static_cast<T>(lens[b]);
        for (std::size_t t = 0; t < lens[b]; ++t) {
          T* dst = gx.data() + (t * batch + b) * width;
          for (std::size_t k = 0; k < width; ++k) dst[k] += self->grad[b * width + k] * inv;
        }
      }
    };
  });
}

/// Softmax over the valid timesteps of each column of `scores` (L, B).
/// Padding positions get weight 0; an empty column is all zeros.
template <std::floating_point T>
Var<T> masked_softmax_time(const Var<T>& scores, std::span<const std::size_t> lengths) {
  detail::check_lengths(scores.shape(), lengths, "masked_softmax_time");
  if (scores.shape().size() != 2) throw ShapeError("masked_softmax_time: scores must be (L, B)");
  const std::size_t batch = scores.shape()[1];
  Tensor<T> out(scores.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    if (lengths[b] == 0) continue;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t t = 0; t < lengths[b]; ++t) mx = std::max(mx, scores.value()[t * batch + b]);
    T total = 0;
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const T e = std::exp(scores.value()[t * batch + b] - mx);
      out[t * batch + b] = e;
      total += e;
    }
    for (std::size_t t = 0; t < lengths[b]; ++t) out[t * batch + b] /= total;
  }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return scores.tape()->record(std::move(out), {scores}, [scores, lens, batch](Node<T>* self) {
    return [scores, lens, batch, self] {
      auto& gs = scores.node()->adjoint();
      for (std::size_t b = 0; b < batch; ++b) {
        T dot = 0;
        for (std::size_t t = 0; t < lens[b]; ++t) dot += self->grad[t * batch + b] * self->value()[t * batch + b];
        for (std::size_t t = 0; t < lens[b]; ++t) {
          const std::size_t i = t * batch + b;
          gs[i] += self->value()[i] * (self->grad[i] - dot);
        }
      }
    };
  });
}

/// sum_t weights[t, b] * x[t, b, :]: (L, B) x (L, B, D) -> (B, D).
template <std::floating_point T>
Var<T> weighted_time_sum(const Var<T>& weights, const Var<T>& x) {
  const Shape& sw = weights.shape();
  const Shape& sx = x.shape();
  if (sw.size() != 2 || sx.size() != 3 || sw[0] != sx[0] || sw[1] != sx[1]) {
    throw ShapeError("weighted_time_sum: incompatible shapes " + numerics::shape_string(sw) + " and " +
                     numerics::shape_string(sx));
  }
  const std::size_t steps = sx[0], batch = sx[1], width = sx[2];
  Tensor<T> out(Shape{batch, width});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const T w = weights.value()[t * batch + b];
      if (w == T(0)) continue;
      const T* row = x.value().data() + (t * batch + b) * width;
      for (std::size_t k = 0; k < width; ++k) out[b * width + k] += w * row[k];
    }
  }
  return x.tape()->record(std::move(out), {weights, x}, [weights, x, steps, batch, width](Node<T>* self) {
    return [weights, x, steps, batch, width, self] {
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t b = 0; b < batch; ++b) {
          const T* g = self->grad.data() + b * width;
          const std::size_t row = (t * batch + b) * width;
          if (weights.requires_grad()) {
            T dot = 0;
            for (std::size_t k = 0; k < width; ++k) dot += g[k] * x.value()[row + k];
            weights.node()->adjoint()[t * batch + b] += dot;
          }
          if (x.requires_grad()) {
            const T w = weights.value()[t * batch + b];
            auto& gx = x.node()->adjoint();
            for (std::size_t k = 0; k < width; ++k) gx[row + k] += w * g[k];
          }
        }
      }
    };
  });
}

/// Constant (B, width) tensor: 1 for examples still inside their valid range at `t`.
template <std::floating_point T>
Tensor<T> step_mask(std::span<const std::size_t> lengths, std::size_t t, std::size_t width) {
  Tensor<T> mask(Shape{lengths.size(), width});
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    if (t < lengths[b]) std::fill_n(mask.data() + b * width, width, T(1));
  }
  return mask;
}

}  // namespace descnet::nn
