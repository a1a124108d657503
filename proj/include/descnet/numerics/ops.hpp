// SPDX-License-Identifier: Apache-2.0
#pragma once

// Primitive differentiable operations. Each records its forward value on the
// input's tape together with the adjoint rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "descnet/numerics/tape.hpp"

namespace descnet::numerics {

namespace fault {
/// Test hook: when set, the tanh adjoint is deliberately wrong so that
/// gradient verification can be shown to fail.
inline bool corrupt_tanh_adjoint = false;
}  // namespace fault

namespace detail {

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t dim = 1;
  std::size_t inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.dim = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

inline Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

/// True when `b` equals `a` or a trailing block of it.
inline bool broadcastable(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

template <class T>
Tape<T>& tape_of(const Var<T>& v) {
  return *v.tape();
}

}  // namespace detail

template <std::floating_point T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(sa) + " x " + shape_string(sb));
  }
  Tensor<T> out(Shape{sa[0], sb[1]});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return detail::tape_of(a).record(std::move(out), {a, b}, [a, b](Node<T>* self) {
    return [a, b, self] {
      const auto g = std::as_const(self->grad).matrix();
      if (a.requires_grad()) a.node()->adjoint().matrix().noalias() += g * b.value().matrix().transpose();
      if (b.requires_grad()) b.node()->adjoint().matrix().noalias() += a.value().matrix().transpose() * g;
    };
  });
}

/// a + b, where b may match a trailing block of a's shape (repeated over the leading axes).
template <std::floating_point T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!detail::broadcastable(a.shape(), b.shape())) {
    throw ShapeError("add: cannot broadcast " + shape_string(b.shape()) + " onto " + shape_string(a.shape()));
  }
  Tensor<T> out = a.value();
  const std::size_t bs = b.value().size();
  const T* bv = b.value().data();
  T* o = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] += bv[i % bs];
  return detail::tape_of(a).record(std::move(out), {a, b}, [a, b](Node<T>* self) {
    return [a, b, self] {
      const auto& g = self->grad;
      if (a.requires_grad()) a.node()->adjoint() += g;
      if (b.requires_grad()) {
        auto& gb = b.node()->adjoint();
        const std::size_t n = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
      }
    };
  });
}

template <std::floating_point T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("sub: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return detail::tape_of(a).record(std::move(out), {a, b}, [a, b](Node<T>* self) {
    return [a, b, self] {
      const auto& g = self->grad;
      if (a.requires_grad()) a.node()->adjoint() += g;
      if (b.requires_grad()) {
        auto& gb = b.node()->adjoint();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    };
  });
}

/// Elementwise a * b with the same broadcasting rule as add().
template <std::floating_point T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (!detail::broadcastable(a.shape(), b.shape())) {
    throw ShapeError("mul: cannot broadcast " + shape_string(b.shape()) + " onto " + shape_string(a.shape()));
  }
  Tensor<T> out = a.value();
  const std::size_t bs = b.value().size();
  const T* bv = b.value().data();
  T* o = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] *= bv[i % bs];
  return detail::tape_of(a).record(std::move(out), {a, b}, [a, b](Node<T>* self) {
    return [a, b, self] {
      const auto& g = self->grad;
      const std::size_t bs = b.value().size();
      if (a.requires_grad()) {
        auto& ga = a.node()->adjoint();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i % bs];
      }
      if (b.requires_grad()) {
        auto& gb = b.node()->adjoint();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % bs] += g[i] * a.value()[i];
      }
    };
  });
}

template <std::floating_point T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& x : out.values()) x *= factor;
  return detail::tape_of(a).record(std::move(out), {a}, [a, factor](Node<T>* self) {
    return [a, factor, self] {
      auto& ga = a.node()->adjoint();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * self->grad[i];
    };
  });
}

template <std::floating_point T>
Var<T> tanh(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& x : out.values()) x = std::tanh(x);
  return detail::tape_of(a).record(std::move(out), {a}, [a](Node<T>* self) {
    return [a, self] {
      auto& ga = a.node()->adjoint();
      const T bias = fault::corrupt_tanh_adjoint ? T(1.1) : T(1);
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const T y = self->value()[i];
        ga[i] += self->grad[i] * (bias - y * y);
      }
    };
  });
}

/// 1 / (1 + exp(-z)) without overflow for large |z|.
template <std::floating_point T>
T stable_sigmoid(T z) {
  if (z >= 0) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <std::floating_point T>
Var<T> sigmoid_fn(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& x : out.values()) x = stable_sigmoid(x);
  return detail::tape_of(a).record(std::move(out), {a}, [a](Node<T>* self) {
    return [a, self] {
      auto& ga = a.node()->adjoint();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const T y = self->value()[i];
        ga[i] += self->grad[i] * y * (T(1) - y);
      }
    };
  });
}

/// Softmax along `axis`, max-subtracted.
template <std::floating_point T>
Var<T> softmax_fn(const Var<T>& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "softmax");
  Tensor<T> out = a.value();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      T* base = out.data() + o * s.dim * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < s.dim; ++k) mx = std::max(mx, base[k * s.inner]);
      T total = 0;
      for (std::size_t k = 0; k < s.dim; ++k) {
        base[k * s.inner] = std::exp(base[k * s.inner] - mx);
        total += base[k * s.inner];
      }
      for (std::size_t k = 0; k < s.dim; ++k) base[k * s.inner] /= total;
    }
  }
  return detail::tape_of(a).record(std::move(out), {a}, [a, s](Node<T>* self) {
    return [a, s, self] {
      auto& ga = a.node()->adjoint();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.dim * s.inner + in;
          T dot = 0;
          for (std::size_t k = 0; k < s.dim; ++k) dot += self->grad[base + k * s.inner] * self->value()[base + k * s.inner];
          for (std::size_t k = 0; k < s.dim; ++k) {
            const std::size_t i = base + k * s.inner;
            ga[i] += self->value()[i] * (self->grad[i] - dot);
          }
        }
      }
    };
  });
}

template <std::floating_point T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  Shape out_shape = first;
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_string(first));
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& sp = p.shape();
    bool ok = sp.size() == first.size();
    for (std::size_t i = 0; ok && i < sp.size(); ++i) ok = i == axis || sp[i] == first[i];
    if (!ok) throw ShapeError("concat: incompatible shapes " + shape_string(first) + " and " + shape_string(sp));
    out_shape[axis] += sp[axis];
  }
  const auto so = detail::split_axis(out_shape, axis, "concat");
  Tensor<T> out(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.shape()[axis] * so.inner;
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(p.value().data() + o * block, block, out.data() + o * so.dim * so.inner + offset * so.inner);
    }
    offset += p.shape()[axis];
  }
  return detail::tape_of(parts[0]).record(std::move(out), parts, [parts, offsets, so, axis](Node<T>* self) {
    return [parts, offsets, so, axis, self] {
      for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& p = parts[pi];
        if (!p.requires_grad()) continue;
        auto& gp = p.node()->adjoint();
        const std::size_t block = p.shape()[axis] * so.inner;
        for (std::size_t o = 0; o < so.outer; ++o) {
          const T* src = self->grad.data() + o * so.dim * so.inner + offsets[pi] * so.inner;
          T* dst = gp.data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
    };
  });
}

/// Stacks equally shaped inputs along a new leading axis.
template <std::floating_point T>
Var<T> stack(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  const Shape& item = parts[0].shape();
  Shape out_shape{parts.size()};
  out_shape.insert(out_shape.end(), item.begin(), item.end());
  const std::size_t block = shape_size(item);
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].shape() != item) {
      throw ShapeError("stack: shape " + shape_string(parts[i].shape()) + " differs from " + shape_string(item));
    }
    std::copy_n(parts[i].value().data(), block, out.data() + i * block);
  }
  return detail::tape_of(parts[0]).record(std::move(out), parts, [parts, block](Node<T>* self) {
    return [parts, block, self] {
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i].requires_grad()) continue;
        auto& g = parts[i].node()->adjoint();
        const T* src = self->grad.data() + i * block;
        for (std::size_t k = 0; k < block; ++k) g[k] += src[k];
      }
    };
  });
}

/// Entries [start, start + length) along `axis`.
template <std::floating_point T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t start, std::size_t length) {
  const auto s = detail::split_axis(a.shape(), axis, "slice");
  if (length == 0 || start + length > s.dim) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + length) +
                     ") out of bounds for shape " + shape_string(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  Tensor<T> out(out_shape);
  const std::size_t block = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(a.value().data() + (o * s.dim + start) * s.inner, block, out.data() + o * block);
  }
  return detail::tape_of(a).record(std::move(out), {a}, [a, s, start, block](Node<T>* self) {
    return [a, s, start, block, self] {
      auto& ga = a.node()->adjoint();
      for (std::size_t o = 0; o < s.outer; ++o) {
        T* dst = ga.data() + (o * s.dim + start) * s.inner;
        const T* src = self->grad.data() + o * block;
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    };
  });
}

/// Sub-tensor at `index` of the leading axis, with that axis removed.
template <std::floating_point T>
Var<T> step(const Var<T>& a, std::size_t index) {
  const Shape& sa = a.shape();
  if (index >= sa[0]) throw ShapeError("step: index " + std::to_string(index) + " out of range for " + shape_string(sa));
  const Shape out_shape = detail::drop_axis(sa, 0);
  const std::size_t block = shape_size(out_shape);
  Tensor<T> out(out_shape);
  std::copy_n(a.value().data() + index * block, block, out.data());
  return detail::tape_of(a).record(std::move(out), {a}, [a, index, block](Node<T>* self) {
    return [a, index, block, self] {
      T* dst = a.node()->adjoint().data() + index * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += self->grad[i];
    };
  });
}

template <std::floating_point T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value();
  out.reshape(std::move(shape));
  return detail::tape_of(a).record(std::move(out), {a}, [a](Node<T>* self) {
    return [a, self] {
      auto& ga = a.node()->adjoint();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self->grad[i];
    };
  });
}

/// Maximum along `axis` (axis removed). The adjoint goes to the first maximal entry.
template <std::floating_point T>
Var<T> max_over_axis(const Var<T>& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "max_over_axis");
  Tensor<T> out(detail::drop_axis(a.shape(), axis));
  std::vector<std::size_t> arg(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.dim * s.inner + in;
      std::size_t best = base;
      for (std::size_t k = 1; k < s.dim; ++k) {
        if (a.value()[base + k * s.inner] > a.value()[best]) best = base + k * s.inner;
      }
      out[o * s.inner + in] = a.value()[best];
      arg[o * s.inner + in] = best;
    }
  }
  return detail::tape_of(a).record(std::move(out), {a}, [a, arg](Node<T>* self) {
    return [a, arg, self] {
      auto& ga = a.node()->adjoint();
      for (std::size_t i = 0; i < arg.size(); ++i) ga[arg[i]] += self->grad[i];
    };
  });
}

template <std::floating_point T>
Var<T> mean_over_axis(const Var<T>& a, std::size_t axis) {
  const auto s = detail::split_axis(a.shape(), axis, "mean_over_axis");
  Tensor<T> out(detail::drop_axis(a.shape(), axis));
  const T inv = T(1) / static_cast<T>(s.dim);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      T total = 0;
      for (std::size_t k = 0; k < s.dim; ++k) total += a.value()[o * s.dim * s.inner + k * s.inner + in];
      out[o * s.inner + in] = total * inv;
    }
  }
  return detail::tape_of(a).record(std::move(out), {a}, [a, s, inv](Node<T>* self) {
    return [a, s, inv, self] {
      auto& ga = a.node()->adjoint();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const T g = self->grad[o * s.inner + in] * inv;
          for (std::size_t k = 0; k < s.dim; ++k) ga[o * s.dim * s.inner + k * s.inner + in] += g;
        }
      }
    };
  });
}

template <std::floating_point T>
Var<T> sum(const Var<T>& a) {
  T total = 0;
  for (T x : a.value().values()) total += x;
  return detail::tape_of(a).record(Tensor<T>::scalar(total), {a}, [a](Node<T>* self) {
    return [a, self] {
      auto& ga = a.node()->adjoint();
      const T g = self->grad[0];
      for (auto& x : ga.values()) x += g;
    };
  });
}

/// Rows of `table` (V, D) picked by `ids`, giving (ids.size(), D). Rows equal
/// to `frozen_id` read as zero vectors and never receive an adjoint.
template <std::floating_point T>
Var<T> embedding_gather(const Var<T>& table, std::span<const std::int32_t> ids, std::int32_t frozen_id = -1) {
  const Shape& st = table.shape();
  if (st.size() != 2) throw ShapeError("embedding_gather: table must be rank 2, got " + shape_string(st));
  if (ids.empty()) throw ShapeError("embedding_gather: no ids");
  const std::size_t d = st[1];
  Tensor<T> out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= st[0]) {
      throw ShapeError("embedding_gather: id " + std::to_string(ids[i]) + " out of range for table " + shape_string(st));
    }
    if (ids[i] == frozen_id) continue;
    std::copy_n(table.value().data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  std::vector<std::int32_t> kept(ids.begin(), ids.end());
  return detail::tape_of(table).record(std::move(out), {table}, [table, kept = std::move(kept), d, frozen_id](Node<T>* self) {
    return [table, kept, d, frozen_id, self] {
      auto& gt = table.node()->adjoint();
      for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] == frozen_id) continue;
        T* dst = gt.data() + static_cast<std::size_t>(kept[i]) * d;
        const T* src = self->grad.data() + i * d;
        for (std::size_t k = 0; k < d; ++k) dst[k] += src[k];
      }
    };
  });
}

}  // namespace descnet::numerics
