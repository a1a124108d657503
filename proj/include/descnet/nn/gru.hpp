// SPDX-License-Identifier: Apache-2.0
#pragma once

// Gated recurrent unit (update convention h = (1 - z) * h_prev + z * h~) and
// the bidirectional layer built from two cells.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "descnet/nn/dropout.hpp"
#include "descnet/nn/init.hpp"
#include "descnet/nn/sequence_ops.hpp"

namespace descnet::nn {

template <std::floating_point T>
struct GRUCell {
  using Param = numerics::Parameter<T>;

  GRUCell(const std::string& prefix, std::size_t input_size, std::size_t hidden_size, Rng& rng)
      : W_z(prefix + ".W_z", glorot_uniform<T>(input_size, hidden_size, rng)),
        U_z(prefix + ".U_z", glorot_uniform<T>(hidden_size, hidden_size, rng)),
        b_z(prefix + ".b_z", Tensor<T>({hidden_size})),
        W_r(prefix + ".W_r", glorot_uniform<T>(input_size, hidden_size, rng)),
        U_r(prefix + ".U_r", glorot_uniform<T>(hidden_size, hidden_size, rng)),
        b_r(prefix + ".b_r", Tensor<T>({hidden_size})),
        W_h(prefix + ".W_h", glorot_uniform<T>(input_size, hidden_size, rng)),
        U_h(prefix + ".U_h", glorot_uniform<T>(hidden_size, hidden_size, rng)),
        b_h(prefix + ".b_h", Tensor<T>({hidden_size})) {}

  Param W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h;

  std::size_t input_size() const { return W_z.value.dim(0); }
  std::size_t hidden_size() const { return W_z.value.dim(1); }

  std::vector<Param*> params() { return {&W_z, &U_z, &b_z, &W_r, &U_r, &b_r, &W_h, &U_h, &b_h}; }

  /// The cell's parameters as leaves of one tape.
  struct Bound {
    Var<T> W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h;
  };

  Bound bind(numerics::Tape<T>& tape) {
    return {tape.parameter(W_z), tape.parameter(U_z), tape.parameter(b_z), tape.parameter(W_r), tape.parameter(U_r),
            tape.parameter(b_r), tape.parameter(W_h), tape.parameter(U_h), tape.parameter(b_h)};
  }
};

/// One step given the input projections x W_* + b_* already computed.
/// `recurrent_mask`, when present, scales h_prev inside the gate projections only.
template <std::floating_point T>
Var<T> gru_cell_step_projected(const typename GRUCell<T>::Bound& cell, const Var<T>& xz, const Var<T>& xr,
                               const Var<T>& xh, const Var<T>& h_prev, const std::optional<Var<T>>& recurrent_mask) {
  using namespace numerics;
  const Var<T> h_in = recurrent_mask ? mul(h_prev, *recurrent_mask) : h_prev;
  const Var<T> z = sigmoid_fn(add(xz, matmul(h_in, cell.U_z)));
  const Var<T> r = sigmoid_fn(add(xr, matmul(h_in, cell.U_r)));
  const Var<T> candidate = numerics::tanh(add(xh, matmul(mul(r, h_in), cell.U_h)));
  // (1 - z) * h_prev + z * candidate
  return add(h_prev, mul(z, sub(candidate, h_prev)));
}

/// z = s(x W_z + h U_z + b_z); r = s(x W_r + h U_r + b_r);
/// h~ = tanh(x W_h + (r * h) U_h + b_h); h_t = (1 - z) * h + z * h~.
template <std::floating_point T>
Var<T> gru_cell_step(const typename GRUCell<T>::Bound& cell, const Var<T>& x_t, const Var<T>& h_prev,
                     const std::optional<Var<T>>& recurrent_mask = std::nullopt) {
  using namespace numerics;
  if (x_t.shape().size() != 2 || h_prev.shape().size() != 2 || x_t.shape()[0] != h_prev.shape()[0] ||
      x_t.shape()[1] != cell.W_z.shape()[0] || h_prev.shape()[1] != cell.U_z.shape()[0]) {
    throw ShapeError("gru_cell_step: x " + shape_string(x_t.shape()) + " / h " + shape_string(h_prev.shape()) +
                     " do not fit cell W " + shape_string(cell.W_z.shape()));
  }
  return gru_cell_step_projected<T>(cell, add(matmul(x_t, cell.W_z), cell.b_z), add(matmul(x_t, cell.W_r), cell.b_r),
                                    add(matmul(x_t, cell.W_h), cell.b_h), h_prev, recurrent_mask);
}

/// Dropout settings for a recurrent layer. Masks are drawn once per batch and
/// reused at every timestep.
struct RecurrentDropout {
  double input_rate = 0.0;
  double recurrent_rate = 0.0;
  bool training = false;
  Rng* rng = nullptr;

  bool input_active() const { return training && input_rate > 0.0 && rng != nullptr; }
  bool recurrent_active() const { return training && recurrent_rate > 0.0 && rng != nullptr; }
};

namespace detail {

/// Runs one cell left to right over (L, B, D); example b is advanced only for
/// t < lengths[b] and its outputs beyond that are zero.
template <std::floating_point T>
Var<T> run_direction(numerics::Tape<T>& tape, GRUCell<T>& cell, Var<T> x, std::span<const std::size_t> lengths,
                     const RecurrentDropout& dropout) {
  using namespace numerics;
  const std::size_t steps = x.shape()[0], batch = x.shape()[1], width = x.shape()[2];
  const std::size_t hidden = cell.hidden_size();
  if (width != cell.input_size()) {
    throw ShapeError("bigru: input width " + std::to_string(width) + " does not match cell input " +
                     std::to_string(cell.input_size()));
  }
  auto bound = cell.bind(tape);
  if (dropout.input_active()) x = mul(x, tape.constant(dropout_mask<T>({batch, width}, dropout.input_rate, *dropout.rng)));
  std::optional<Var<T>> rec_mask;
  if (dropout.recurrent_active()) {
    rec_mask = tape.constant(dropout_mask<T>({batch, hidden}, dropout.recurrent_rate, *dropout.rng));
  }

  const Var<T> flat = reshape(x, {steps * batch, width});
  const Var<T> xz = reshape(add(matmul(flat, bound.W_z), bound.b_z), {steps, batch, hidden});
  const Var<T> xr = reshape(add(matmul(flat, bound.W_r), bound.b_r), {steps, batch, hidden});
  const Var<T> xh = reshape(add(matmul(flat, bound.W_h), bound.b_h), {steps, batch, hidden});

  const std::size_t shortest = *std::min_element(lengths.begin(), lengths.end());
  Var<T> h = tape.constant(Tensor<T>({batch, hidden}));
  std::vector<Var<T>> outputs;
  outputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Var<T> h_new = gru_cell_step_projected<T>(bound, step(xz, t), step(xr, t), step(xh, t), h, rec_mask);
    if (t < shortest) {
      h = h_new;
      outputs.push_back(h);
    } else {
      const Var<T> mask = tape.constant(step_mask<T>(lengths, t, hidden));
      h = add(h, mul(sub(h_new, h), mask));
      outputs.push_back(mul(h, mask));
    }
  }
  return stack(outputs);
}

}  // namespace detail

template <std::floating_point T>
struct BiGRU {
  BiGRU(const std::string& prefix, std::size_t input_size, std::size_t hidden_size, Rng& rng)
      : forward_cell(prefix + ".fwd", input_size, hidden_size, rng),
        backward_cell(prefix + ".bwd", input_size, hidden_size, rng) {}

  GRUCell<T> forward_cell;
  GRUCell<T> backward_cell;

  std::size_t hidden_size() const { return forward_cell.hidden_size(); }
  std::size_t output_size() const { return 2 * hidden_size(); }

  std::vector<numerics::Parameter<T>*> params() {
    auto out = forward_cell.params();
    for (auto* p : backward_cell.params()) out.push_back(p);
    return out;
  }
};

/// (L, B, D) -> (L, B, 2H): [forward state at t ; backward state at t], where
/// the backward pass starts at each example's last valid step.
template <std::floating_point T>
Var<T> bigru_forward(numerics::Tape<T>& tape, BiGRU<T>& layer, const Var<T>& x, std::span<const std::size_t> lengths,
                     const RecurrentDropout& dropout = {}) {
  if (x.shape().size() != 3) throw ShapeError("bigru_forward: input must be (L, B, D), got " + numerics::shape_string(x.shape()));
  detail::check_lengths(x.shape(), lengths, "bigru_forward");
  const Var<T> fwd = detail::run_direction(tape, layer.forward_cell, x, lengths, dropout);
  const Var<T> bwd_reversed = detail::run_direction(tape, layer.backward_cell, time_reverse(x, lengths), lengths, dropout);
  return numerics::concat<T>({fwd, time_reverse(bwd_reversed, lengths)}, 2);
}

}  // namespace descnet::nn
