// Copyright 2026 The mltts Authors
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

#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mltts/array.hpp"
#include "mltts/errors.hpp"

namespace mltts::ad {

// Persistent trainable parameter. Gradients accumulate here across backward
// passes until the optimizer consumes them; Adam state is allocated lazily.
template <typename S>
struct Variable {
  std::string name;
  Array<S> value;
  Array<S> grad;
  bool trainable = true;
  Array<S> adam_m, adam_v;

  Variable(std::string n, Array<S> val) : name(std::move(n)), value(std::move(val)) {
    grad = Array<S>::zeros(value.shape);
  }

  void zero_grad() { grad.fill(S(0)); }
};

template <typename S>
class Tape;

// One recorded operation result. Leaf nodes alias a Variable's storage so
// values are not copied per forward pass and gradients land directly on the
// parameter.
template <typename S>
struct Node {
  Array<S> value;
  Array<S> grad;
  const Array<S>* ext_value = nullptr;
  Array<S>* ext_grad = nullptr;
  bool requires_grad = false;
  std::function<void(Node<S>&)> backward;
  const char* op = "";
  size_t idx = 0;

  const Array<S>& val() const { return ext_value ? *ext_value : value; }
  Array<S>& g() { return ext_grad ? *ext_grad : grad; }
};

// Cheap handle into the tape. Valid only while the owning tape is alive.
template <typename S>
class Tensor {
public:
  Tensor() = default;
  Tensor(Node<S>* n, Tape<S>* t) : n_(n), t_(t) {}

  bool valid() const { return n_ != nullptr; }
  const Array<S>& value() const { return n_->val(); }
  const Array<S>& grad() const { return n_->g(); }
  bool requires_grad() const { return n_->requires_grad; }
  const std::vector<int>& shape() const { return n_->val().shape; }
  int64_t numel() const { return n_->val().numel(); }

  Node<S>* node() const { return n_; }
  Tape<S>* tape() const { return t_; }

private:
  Node<S>* n_ = nullptr;
  Tape<S>* t_ = nullptr;
};

// Dynamic computation tape. Operations append nodes in execution order, so
// topological order holds by construction; backward() replays the recorded
// ops in reverse, summing gradients at fan-out points. Single-threaded by
// contract; independent tapes may run concurrently.
template <typename S>
class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }
  size_t size() const { return nodes_.size(); }

  // Constant input (targets, fixed data). Never receives a gradient.
  Tensor<S> constant(Array<S> value, const char* op = "const") {
    Node<S>& n = push();
    n.value = std::move(value);
    n.op = op;
    return Tensor<S>(&n, this);
  }

  // Gradient-checkable input that owns its storage.
  Tensor<S> input(Array<S> value, bool requires_grad, const char* op = "input") {
    Node<S>& n = push();
    n.value = std::move(value);
    n.op = op;
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.grad = Array<S>::zeros(n.value.shape);
    return Tensor<S>(&n, this);
  }

  // Leaf aliasing a parameter; gradients accumulate into var.grad.
  Tensor<S> leaf(Variable<S>& var) {
    Node<S>& n = push();
    n.ext_value = &var.value;
    n.op = "param";
    n.requires_grad = var.trainable && grad_enabled_;
    if (n.requires_grad) n.ext_grad = &var.grad;
    return Tensor<S>(&n, this);
  }

  // Record a new op result. requires_grad propagates from parents; the
  // backward closure is dropped when no parent needs a gradient.
  Tensor<S> make(Array<S> value, std::initializer_list<Tensor<S>> parents, const char* op,
                 std::function<void(Node<S>&)> bw) {
    bool needs = false;
    if (grad_enabled_) {
      for (const Tensor<S>& p : parents) {
        if (p.valid() && p.requires_grad()) {
          needs = true;
          break;
        }
      }
    }
    return make_impl(std::move(value), needs, op, std::move(bw));
  }

  Tensor<S> make(Array<S> value, const std::vector<Tensor<S>>& parents, const char* op,
                 std::function<void(Node<S>&)> bw) {
    bool needs = false;
    if (grad_enabled_) {
      for (const Tensor<S>& p : parents) {
        if (p.valid() && p.requires_grad()) {
          needs = true;
          break;
        }
      }
    }
    return make_impl(std::move(value), needs, op, std::move(bw));
  }

  // Seeds d(loss)/d(loss)=1 and replays recorded ops in reverse order.
  void backward(Tensor<S> loss) {
    if (!loss.valid() || loss.tape() != this)
      throw ConfigError("backward() called with a tensor from a different tape");
    if (loss.numel() != 1)
      throw DimensionError("backward() expects a scalar loss, got shape " +
                           shape_str(loss.shape()));
    if (!loss.requires_grad()) return;
    loss.node()->g().v[0] += S(1);
    for (size_t i = loss.node()->idx + 1; i-- > 0;) {
      Node<S>& n = nodes_[i];
      if (n.requires_grad && n.backward) n.backward(n);
    }
  }

private:
  Tensor<S> make_impl(Array<S> value, bool needs, const char* op,
                      std::function<void(Node<S>&)> bw) {
    Node<S>& n = push();
    n.value = std::move(value);
    n.op = op;
    n.requires_grad = needs;
    if (n.requires_grad) {
      n.grad = Array<S>::zeros(n.value.shape);
      n.backward = std::move(bw);
    }
    return Tensor<S>(&n, this);
  }

  Node<S>& push() {
    nodes_.emplace_back();
    nodes_.back().idx = nodes_.size() - 1;
    return nodes_.back();
  }

  std::deque<Node<S>> nodes_;
  bool grad_enabled_ = true;
};

} // namespace mltts::ad
