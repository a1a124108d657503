// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "descnet/nn/init.hpp"
#include "descnet/nn/sequence_ops.hpp"

namespace descnet::nn {

/// Additive attention over time: u_i = tanh(h_i W + b), a = softmax_i(u_i . u_s)
/// over valid steps, v = sum_i a_i h_i.
template <std::floating_point T>
struct AttentionLayer {
  AttentionLayer(const std::string& prefix, std::size_t input_size, std::size_t attention_size, Rng& rng)
      : projection(prefix + ".W", glorot_uniform<T>(input_size, attention_size, rng)),
        bias(prefix + ".b", Tensor<T>({attention_size})),
        context(prefix + ".u_s", glorot_uniform<T>(attention_size, 1, rng)) {}

  numerics::Parameter<T> projection;
  numerics::Parameter<T> bias;
  numerics::Parameter<T> context;

  std::vector<numerics::Parameter<T>*> params() { return {&projection, &bias, &context}; }
};

template <std::floating_point T>
struct AttentionOutput {
  Var<T> context;  // (B, H)
  Var<T> weights;  // (L, B)
};

/// Empty examples get all-zero weights and a zero context vector.
template <std::floating_point T>
AttentionOutput<T> attention_forward(numerics::Tape<T>& tape, AttentionLayer<T>& layer, const Var<T>& h,
                                     std::span<const std::size_t> lengths) {
  using namespace numerics;
  if (h.shape().size() != 3) throw ShapeError("attention_forward: input must be (L, B, H)");
  detail::check_lengths(h.shape(), lengths, "attention_forward");
  const std::size_t steps = h.shape()[0], batch = h.shape()[1], width = h.shape()[2];
  const Var<T> flat = reshape(h, {steps * batch, width});
  const Var<T> u = numerics::tanh(add(matmul(flat, tape.parameter(layer.projection)), tape.parameter(layer.bias)));
  const Var<T> scores = reshape(matmul(u, tape.parameter(layer.context)), {steps, batch});
  const Var<T> weights = masked_softmax_time(scores, lengths);
  return {weighted_time_sum(weights, h), weights};
}

}  // namespace descnet::nn
