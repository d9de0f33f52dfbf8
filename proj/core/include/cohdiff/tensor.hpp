// Copyright 2026 The cohdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COHDIFF_TENSOR_HPP_
#define COHDIFF_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cohdiff/errors.hpp"

namespace cohdiff {

template <class S>
class Tape;

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor extents must be positive");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor. Value-semantic handle over shared storage; by
// convention the buffer is written only while the producing op constructs it,
// after which every holder treats it as read-only. A tensor is grad-tracked
// when it was emitted onto a live Tape (node() >= 0).
template <class S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<S>>(shape_numel(shape_), S(0))) {}

  static Tensor from(Shape shape, std::vector<S> values) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
      throw DimensionError("value count does not match shape " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<S>>(std::move(values));
    return t;
  }

  static Tensor full(Shape shape, S value) {
    Tensor t(std::move(shape));
    for (auto& v : *t.data_) v = value;
    return t;
  }

  static Tensor scalar(S value) { return from({1}, {value}); }

  bool empty() const { return !data_; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

  const S* data() const { return data_->data(); }
  S* mutable_data() { return data_->data(); }

  S value() const {
    if (numel() != 1) throw DimensionError("value() requires a 1-element tensor");
    return (*data_)[0];
  }

  S at(std::initializer_list<int> idx) const {
    int64_t off = 0;
    size_t i = 0;
    for (int v : idx) off = off * shape_[i++] + v;
    return (*data_)[static_cast<size_t>(off)];
  }

  bool grad_tracked() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape<S>* tape() const { return tape_; }

  /// Detached copy of the same storage (drops tape membership).
  Tensor detached() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<S>>(*data_);
    return t;
  }

  bool all_finite() const {
    for (const S& v : *data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  const std::shared_ptr<std::vector<S>>& storage() const { return data_; }

 private:
  friend class Tape<S>;

  Shape shape_;
  std::shared_ptr<std::vector<S>> data_;
  Tape<S>* tape_ = nullptr;
  int node_ = -1;
};

template <class S>
bool same_shape(const Tensor<S>& a, const Tensor<S>& b) {
  return a.shape() == b.shape();
}

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (!same_shape(a, b))
    throw DimensionError(std::string(op) + ": shapes differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

template <class S>
bool bitwise_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) return false;
  const S* pa = a.data();
  const S* pb = b.data();
  for (int64_t i = 0; i < a.numel(); ++i)
    if (std::memcmp(&pa[i], &pb[i], sizeof(S)) != 0) return false;
  return true;
}

template <class S>
double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return m;
}

}  // namespace cohdiff

#endif  // COHDIFF_TENSOR_HPP_
