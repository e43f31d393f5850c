// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "remreg/tensor.hpp"

namespace remreg {

/// One value on the gradient tape. Op results hold their inputs so the
/// backward closure can push gradients upstream.
template <typename T>
struct Node {
  Tensor<T> value;
  std::optional<Tensor<T>> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  /// Adds `g` into the gradient buffer, allocating it on first use.
  void accumulate(const Tensor<T>& g);
  Tensor<T>& grad_buffer();
};

/// Shared handle to a tape node. Copies alias the same node.
template <typename T>
class Var {
 public:
  Var() = default;

  static Var constant(Tensor<T> value);
  static Var leaf(Tensor<T> value, bool requires_grad);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const std::optional<Tensor<T>>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.reset(); }

  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}
  template <typename U>
  friend Var<U> make_result(Tensor<U>, std::vector<Var<U>>, std::function<void(Node<U>&)>);

  std::shared_ptr<Node<T>> node_;
};

/// Wraps an op output. If no input requires a gradient the result is a
/// constant and the closure is dropped; otherwise it joins the tape.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward_fn);

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable node that requires one.
template <typename T>
void backward(const Var<T>& loss);

/// Named trainable tensor. Frozen params never receive a gradient.
template <typename T>
struct Param {
  std::string name;
  Var<T> var;
  bool frozen = false;

  void set_frozen(bool f) {
    frozen = f;
    var.set_requires_grad(!f);
    if (f) var.zero_grad();
  }
};

/// Deep copy onto fresh leaves; the result shares no nodes with `params`.
template <typename T>
std::vector<Param<T>> clone_params(const std::vector<Param<T>>& params) {
  std::vector<Param<T>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, Var<T>::leaf(p.var.value(), !p.frozen), p.frozen});
  return out;
}

template <typename T>
Index count_scalars(const std::vector<Param<T>>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.var.value().numel();
  return n;
}

}  // namespace remreg
