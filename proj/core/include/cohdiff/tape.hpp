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

#ifndef COHDIFF_TAPE_HPP_
#define COHDIFF_TAPE_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cohdiff/errors.hpp"
#include "cohdiff/tensor.hpp"

namespace cohdiff {

/// A named learnable tensor. `grad` is accumulated by Tape::backward and
/// consumed by the optimizer between steps.
template <class S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  std::vector<S> grad;

  Parameter(std::string n, Tensor<S> v)
      : name(std::move(n)), value(std::move(v)), grad(value.numel(), S(0)) {}
};

// Reverse-mode gradient tape. Ops emit one node per output tensor; nodes are
// replayed in reverse creation order, which is a valid topological order
// because inputs always precede outputs. Single-threaded by contract: one
// tape per training example, grads merged across examples afterwards.
template <class S>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape<S>&, const S*)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `out` as a tape node. `back` receives this node's output
  /// gradient and must accumulate into the parents' buffers via grad().
  int emit(Tensor<S>& out, BackwardFn back) {
    nodes_.push_back(Node{out.numel(), std::move(back)});
    out.tape_ = this;
    out.node_ = static_cast<int>(nodes_.size()) - 1;
    return out.node_;
  }

  /// Marks an externally-created tensor as a differentiable leaf.
  Tensor<S> watch(const Tensor<S>& t) {
    Tensor<S> leaf = t.detached();
    emit(leaf, BackwardFn{});
    return leaf;
  }

  /// Binds a parameter as a leaf. After backward(), the gradient w.r.t.
  /// this use is added into p.grad. The returned tensor shares p's storage.
  Tensor<S> param(Parameter<S>& p) {
    Tensor<S> leaf = p.value.detached();
    int node = emit(leaf, BackwardFn{});
    bindings_.emplace_back(node, &p);
    return leaf;
  }

  /// Gradient buffer for `node`, zero-initialized on first touch.
  std::vector<S>& grad(int node) {
    auto& g = grads_[static_cast<size_t>(node)];
    if (g.empty()) g.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].numel), S(0));
    return g;
  }

  bool touched(int node) const { return !grads_[static_cast<size_t>(node)].empty(); }

  /// One parameter's gradient contribution from this tape; a parameter
  /// bound several times yields several entries, in binding order.
  struct ParamGradEntry {
    Parameter<S>* param;
    std::vector<S> grad;
  };

  /// Reverse-mode accumulation from a scalar loss into per-binding buffers.
  /// Does not touch Parameter::grad, so independent tapes may run on
  /// separate threads and be reduced afterwards in a fixed order.
  std::vector<ParamGradEntry> backward_collect(const Tensor<S>& loss) {
    if (loss.numel() != 1) throw DimensionError("backward: loss must be scalar");
    if (loss.tape() != this || loss.node() < 0)
      throw ParameterError("backward: loss does not belong to this tape");
    grads_.assign(nodes_.size(), {});
    grad(loss.node())[0] = S(1);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      auto& g = grads_[static_cast<size_t>(i)];
      if (g.empty()) continue;
      if (nodes_[static_cast<size_t>(i)].back) nodes_[static_cast<size_t>(i)].back(*this, g.data());
    }
    std::vector<ParamGradEntry> out;
    for (auto& [node, p] : bindings_) {
      auto& g = grads_[static_cast<size_t>(node)];
      if (g.empty()) continue;
      out.push_back(ParamGradEntry{p, std::move(g)});
    }
    return out;
  }

  /// Runs reverse-mode accumulation from a scalar loss. Parameters that the
  /// forward pass never touched receive no update (their grad stays exactly
  /// as it was, normally zero after zero_grad).
  void backward(const Tensor<S>& loss) {
    for (auto& entry : backward_collect(loss))
      for (size_t i = 0; i < entry.grad.size(); ++i) entry.param->grad[i] += entry.grad[i];
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    int64_t numel;
    BackwardFn back;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<S>> grads_;
  std::vector<std::pair<int, Parameter<S>*>> bindings_;
};

/// Ordered registry of parameters. Iteration order is creation order, which
/// fixes both the SGD update order and the checkpoint layout.
template <class S>
class ParamStore {
 public:
  Parameter<S>& create(const std::string& name, Tensor<S> init) {
    if (index_.count(name)) throw ParameterError("duplicate parameter name: " + name);
    items_.push_back(std::make_unique<Parameter<S>>(name, std::move(init)));
    index_[name] = items_.size() - 1;
    return *items_.back();
  }

  Parameter<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].get();
  }

  const Parameter<S>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].get();
  }

  size_t size() const { return items_.size(); }
  Parameter<S>& operator[](size_t i) { return *items_[i]; }
  const Parameter<S>& operator[](size_t i) const { return *items_[i]; }

  int64_t total_numel() const {
    int64_t n = 0;
    for (const auto& p : items_) n += p->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : items_)
      std::fill(p->grad.begin(), p->grad.end(), S(0));
  }

  /// Plain stochastic gradient step with a fixed step size.
  void sgd_step(S lr) {
    for (auto& p : items_) {
      S* v = p->value.mutable_data();
      for (int64_t i = 0; i < p->value.numel(); ++i) v[i] -= lr * p->grad[i];
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<S>>> items_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace cohdiff

#endif  // COHDIFF_TAPE_HPP_
