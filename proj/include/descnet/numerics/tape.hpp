// SPDX-License-Identifier: Apache-2.0
#pragma once

// Recorded-computation reverse-mode differentiation.
//
// A Tape owns every intermediate produced while evaluating an expression.
// Nodes are appended in evaluation order; backward() walks them in exact
// reverse order, so each node's adjoint is complete before it is pushed to
// its inputs. Adjoints accumulate additively, which handles fan-out.

#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "descnet/numerics/tensor.hpp"

namespace descnet::numerics {

template <std::floating_point T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor<T> value, bool trainable = true)
      : name(std::move(name)), value(std::move(value)), trainable(trainable) {
    reset_state();
  }

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
  // Adam first/second moment slots.
  Tensor<T> moment1;
  Tensor<T> moment2;

  void zero_grad() { grad.fill(T(0)); }

  void reset_state() {
    grad = Tensor<T>(value.shape());
    moment1 = Tensor<T>(value.shape());
    moment2 = Tensor<T>(value.shape());
  }
};

template <std::floating_point T>
class Tape;

template <std::floating_point T>
struct Node {
  Tensor<T> storage;
  const Tensor<T>* bound = nullptr;  // parameter value read in place
  Tensor<T> grad;
  bool has_grad = false;
  bool requires_grad = false;
  Parameter<T>* param = nullptr;
  std::function<void()> backward;

  const Tensor<T>& value() const { return bound != nullptr ? *bound : storage; }

  /// Adjoint buffer, zero-initialized on first use.
  Tensor<T>& adjoint() {
    if (!has_grad) {
      grad = Tensor<T>(value().shape());
      has_grad = true;
    }
    return grad;
  }
};

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <std::floating_point T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, Node<T>* node) : tape_(tape), node_(node) {}

  const Tensor<T>& value() const { return node_->value(); }
  const Shape& shape() const { return node_->value().shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  /// Adjoint after backward(); zeros if nothing flowed here.
  Tensor<T> grad() const { return node_->has_grad ? node_->grad : Tensor<T>(node_->value().shape()); }

  Tape<T>* tape() const { return tape_; }
  Node<T>* node() const { return node_; }

 private:
  Tape<T>* tape_ = nullptr;
  Node<T>* node_ = nullptr;
};

template <std::floating_point T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that never receives an adjoint.
  Var<T> constant(Tensor<T> value) {
    Node<T>& n = nodes_.emplace_back();
    n.storage = std::move(value);
    return Var<T>(this, &n);
  }

  /// Input whose adjoint is readable after backward() but feeds no Parameter.
  Var<T> variable(Tensor<T> value) {
    Node<T>& n = nodes_.emplace_back();
    n.storage = std::move(value);
    n.requires_grad = true;
    return Var<T>(this, &n);
  }

  /// Leaf bound to a Parameter; backward() adds its adjoint to param.grad.
  /// The parameter value is read in place and must not change while the
  /// tape is alive.
  Var<T> parameter(Parameter<T>& param) {
    Node<T>& n = nodes_.emplace_back();
    n.bound = &param.value;
    n.requires_grad = param.trainable;
    n.param = &param;
    return Var<T>(this, &n);
  }

  /// Records an operation result. `make_backward` receives the output node
  /// and returns its adjoint rule; it is only invoked when some input needs
  /// a gradient.
  template <class MakeBackward>
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, MakeBackward&& make_backward) {
    return record(std::move(value), std::vector<Var<T>>(inputs), std::forward<MakeBackward>(make_backward));
  }

  template <class MakeBackward>
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, MakeBackward&& make_backward) {
    for (const auto& in : inputs) {
      if (in.tape() != this) throw ShapeError("operation mixes variables from different tapes");
    }
    Node<T>& n = nodes_.emplace_back();
    n.storage = std::move(value);
    for (const auto& in : inputs) n.requires_grad = n.requires_grad || in.requires_grad();
    if (n.requires_grad) n.backward = make_backward(&n);
    return Var<T>(this, &n);
  }

  std::size_t size() const { return nodes_.size(); }

  /// Populates adjoints of every node reachable from `loss` and adds leaf
  /// adjoints into their Parameters' gradients. Parameter gradients are not
  /// reset here: calling twice accumulates, so zero them once per step.
  void backward(const Var<T>& loss) {
    if (loss.tape() != this) throw ShapeError("backward: loss belongs to another tape");
    if (loss.value().size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
    }
    loss.node()->adjoint()[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = *it;
      if (!n.has_grad || !n.requires_grad) continue;
      if (n.backward) n.backward();
      if (n.param != nullptr && n.param->trainable) n.param->grad += n.grad;
    }
  }

 private:
  std::deque<Node<T>> nodes_;
};

}  // namespace descnet::numerics
