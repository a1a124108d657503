// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "descnet/error.hpp"

namespace descnet::numerics {

using Shape = std::vector<std::size_t>;

enum class Precision { f32, f64 };

template <std::floating_point T>
inline constexpr Precision precision_of = sizeof(T) == 4 ? Precision::f32 : Precision::f64;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ')';
  return out.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array. Every dimension is at least 1; a scalar has shape (1).
template <std::floating_point T>
class Tensor {
 public:
  using Scalar = T;
  using MatrixMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() : shape_{1}, values_(1, T(0)) {}

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_shape();
    values_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (values_.size() != shape_size(shape_)) {
      throw ShapeError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(values_.size()) +
                       " values");
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  T& operator[](std::size_t i) { return values_[i]; }
  T operator[](std::size_t i) const { return values_[i]; }

  T& at(std::size_t row, std::size_t col) { return values_[row * shape_.back() + col]; }
  T at(std::size_t row, std::size_t col) const { return values_[row * shape_.back() + col]; }

  /// Views a rank-2 tensor as an Eigen matrix.
  MatrixMap matrix() {
    require_rank(2, "matrix");
    return MatrixMap(values_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1]));
  }
  ConstMatrixMap matrix() const {
    require_rank(2, "matrix");
    return ConstMatrixMap(values_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1]));
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  void reshape(Shape shape) {
    if (shape_size(shape) != values_.size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
    check_shape();
  }

  Tensor& operator+=(const Tensor& other) {
    if (other.shape_ != shape_) throw ShapeError("+= shape mismatch " + shape_string(shape_) + " vs " + shape_string(other.shape_));
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  template <std::floating_point U>
  Tensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  void check_shape() const {
    if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + shape_string(shape_));
    }
  }
  void require_rank(std::size_t r, const char* what) const {
    if (shape_.size() != r) throw ShapeError(std::string(what) + ": expected rank " + std::to_string(r) + ", got " + shape_string(shape_));
  }

  Shape shape_;
  std::vector<T> values_;
};

}  // namespace descnet::numerics
