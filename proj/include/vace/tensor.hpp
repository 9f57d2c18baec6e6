// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vace/errors.hpp"

namespace vace {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

/// Storage aligned to Eigen's widest packet. Eigen peels vectorized loops by
/// address, so unaligned buffers would make sums depend on where malloc lands.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense row-major tensor. Shape () holds one scalar.
///
/// The optional gradient slot always has the same shape as the value; it is
/// allocated lazily by grad() and dropped by clear_grad().
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : shape_{0} {}

  explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
  }

  BasicTensor(Shape shape, const std::vector<T>& data) : BasicTensor(std::move(shape), Buffer<T>(data.begin(), data.end())) {}

  BasicTensor(Shape shape, Buffer<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
      throw DimensionError("tensor: shape " + shape_str(shape_) + " needs " +
                           std::to_string(shape_numel(shape_)) + " values, got " +
                           std::to_string(data_.size()));
    }
  }

  static BasicTensor scalar(T v) { return BasicTensor(Shape{}, Buffer<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }
  Buffer<T>& storage() noexcept { return data_; }
  const Buffer<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Flat offset of a multi-index. Bounds are checked.
  std::size_t offset(std::initializer_list<std::int64_t> idx) const {
    if (idx.size() != shape_.size()) {
      throw DimensionError("tensor index: rank " + std::to_string(idx.size()) + " vs shape " +
                           shape_str(shape_));
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (auto i : idx) {
      if (i < 0 || i >= shape_[axis]) {
        throw DimensionError("tensor index " + std::to_string(i) + " out of range on axis " +
                             std::to_string(axis) + " of " + shape_str(shape_));
      }
      off = off * static_cast<std::size_t>(shape_[axis]) + static_cast<std::size_t>(i);
      ++axis;
    }
    return off;
  }

  T& at(std::initializer_list<std::int64_t> idx) { return data_[offset(idx)]; }
  const T& at(std::initializer_list<std::int64_t> idx) const { return data_[offset(idx)]; }

  /// Same data, new shape. Element count must match.
  BasicTensor reshaped(Shape shape) const {
    if (shape_numel(shape) != shape_numel(shape_)) {
      throw DimensionError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    }
    return BasicTensor(std::move(shape), data_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool has_grad() const noexcept { return grad_.has_value(); }
  Buffer<T>& grad() {
    if (!grad_) grad_.emplace(data_.size(), T(0));
    return *grad_;
  }
  const Buffer<T>& grad() const {
    if (!grad_) throw ContractError("tensor: gradient slot is empty");
    return *grad_;
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), T(0));
  }
  void clear_grad() { grad_.reset(); }

  /// Elementwise value conversion. The gradient slot is not carried over.
  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, Buffer<U>(data_.begin(), data_.end()));
  }

  /// Value equality (shape and every stored scalar); ignores gradients.
  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const Shape& shape) {
    for (auto e : shape) {
      if (e < 0) throw DimensionError("tensor: negative extent in " + shape_str(shape));
    }
  }

  Shape shape_;
  Buffer<T> data_;
  std::optional<Buffer<T>> grad_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

}  // namespace vace
