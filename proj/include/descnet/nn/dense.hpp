// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "descnet/nn/init.hpp"
#include "descnet/numerics/ops.hpp"

namespace descnet::nn {

enum class Activation { none, softmax, sigmoid };

template <std::floating_point T>
struct DenseLayer {
  DenseLayer(const std::string& prefix, std::size_t input_size, std::size_t output_size, Activation activation, Rng& rng)
      : weights(prefix + ".W", glorot_uniform<T>(input_size, output_size, rng)),
        bias(prefix + ".b", numerics::Tensor<T>({output_size})),
        activation(activation) {}

  numerics::Parameter<T> weights;  // (in, out); column j is class j's weight vector
  numerics::Parameter<T> bias;
  Activation activation;

  std::size_t output_size() const { return weights.value.dim(1); }
  std::vector<numerics::Parameter<T>*> params() { return {&weights, &bias}; }

  numerics::Var<T> forward(numerics::Tape<T>& tape, const numerics::Var<T>& x) {
    using namespace numerics;
    const Var<T> logits = add(matmul(x, tape.parameter(weights)), tape.parameter(bias));
    switch (activation) {
      case Activation::softmax:
        return softmax_fn(logits, 1);
      case Activation::sigmoid:
        return sigmoid_fn(logits);
      case Activation::none:
        break;
    }
    return logits;
  }
};

}  // namespace descnet::nn
