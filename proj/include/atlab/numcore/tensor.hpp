// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "atlab/errors.hpp"

namespace atlab::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Shared handle to a dense row-major buffer plus its gradient.
///
/// Copies alias the same storage, which is what lets the autodiff graph
/// accumulate gradients into parameters held elsewhere. Use clone() for an
/// independent deep copy.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T value) { return Tensor({1}, std::vector<T>{value}); }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t size() const { return s_->values.size(); }
  std::size_t rank() const { return s_->shape.size(); }

  // 1-D tensors are viewed as a single row.
  std::size_t rows() const { return rank() == 1 ? 1 : s_->shape[0]; }
  std::size_t cols() const { return s_->shape.back(); }

  std::span<T> values() { return s_->values; }
  std::span<const T> values() const { return s_->values; }
  T& operator[](std::size_t i) { return s_->values[i]; }
  T operator[](std::size_t i) const { return s_->values[i]; }
  T at(std::size_t r, std::size_t c) const { return s_->values[r * cols() + c]; }
  T item() const;

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool v) { s_->requires_grad = v; }

  bool has_grad() const { return !s_->grad.empty(); }
  // Allocates a zero gradient on first access. Const because the gradient
  // belongs to the shared storage, not to this handle.
  std::span<T> grad() const;
  std::span<const T> grad_or_empty() const { return s_->grad; }
  void zero_grad() const;

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }
  Tensor clone() const;

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = static_cast<U>(s_->values[i]);
    return Tensor<U>(shape(), std::move(out), requires_grad());
  }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace atlab::num
