#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/errors.hpp"

namespace nowcast {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ')';
  return out.str();
}

/// Dense row-major tensor. Feature maps use NCHW layout.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != numel(shape_))
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// 4-D accessor (n, c, h, w).
  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) noexcept {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  const T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const noexcept {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  Tensor& fill(T v) {
    std::fill(data_.begin(), data_.end(), v);
    return *this;
  }

  Tensor reshaped(Shape shape) const {
    if (numel(shape) != numel(shape_))
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    return Tensor(std::move(shape), data_);
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

inline void require_shape(const Shape& actual, const Shape& expected, const std::string& what) {
  if (actual != expected)
    throw ShapeError(what + ": expected " + to_string(expected) + ", got " + to_string(actual));
}

inline void require_rank(const Shape& actual, std::size_t rank, const std::string& what) {
  if (actual.size() != rank)
    throw ShapeError(what + ": expected rank " + std::to_string(rank) + ", got " + to_string(actual));
}

/// Copies sample `index` of an NCHW batch into a 1xCxHxW tensor.
template <class T>
Tensor<T> slice_batch(const Tensor<T>& batch, std::int64_t index) {
  Shape s = batch.shape();
  const std::int64_t per = numel(s) / s[0];
  s[0] = 1;
  Tensor<T> out(s);
  std::copy_n(batch.data() + index * per, per, out.data());
  return out;
}

/// Stacks equally shaped tensors along a new leading axis (or the existing one when it is 1).
template <class T>
Tensor<T> stack(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ArgumentError("stack: no tensors");
  Shape s = parts.front().shape();
  const bool squeeze = !s.empty() && s[0] == 1 && s.size() == 4;
  Shape out_shape = s;
  if (squeeze)
    out_shape[0] = static_cast<std::int64_t>(parts.size());
  else
    out_shape.insert(out_shape.begin(), static_cast<std::int64_t>(parts.size()));
  Tensor<T> out(out_shape);
  const std::size_t per = parts.front().size();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require_shape(parts[i].shape(), s, "stack");
    std::copy_n(parts[i].data(), per, out.data() + i * per);
  }
  return out;
}

}  // namespace nowcast
