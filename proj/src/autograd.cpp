// SPDX-License-Identifier: Apache-2.0
#include "remreg/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace remreg {

template <typename T>
void Node<T>::accumulate(const Tensor<T>& g) {
  require_same_shape(g.shape(), value.shape(), "gradient accumulation");
  if (!grad) {
    grad = g;
    return;
  }
  T* dst = grad->ptr();
  const T* src = g.ptr();
  const Index n = g.numel();
  for (Index i = 0; i < n; ++i) dst[i] += src[i];
}

template <typename T>
Tensor<T>& Node<T>::grad_buffer() {
  if (!grad) grad.emplace(value.shape());
  return *grad;
}

template <typename T>
Var<T> Var<T>::constant(Tensor<T> value) {
  return leaf(std::move(value), false);
}

template <typename T>
Var<T> Var<T>::leaf(Tensor<T> value, bool requires_grad) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

template <typename T>
T Var<T>::item() const {
  if (node_->value.numel() != 1) {
    throw DimensionError("item() on non-scalar tensor " + node_->value.shape().str());
  }
  return node_->value[0];
}

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward_fn) {
#ifndef NDEBUG
  value.require_finite("op result");
#endif
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad()) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.node_ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Var<T>(std::move(n));
}

template <typename T>
void backward(const Var<T>& loss) {
  if (loss.value().numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + loss.shape().str());
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::unordered_set<Node<T>*> on_stack;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(&loss.node(), 0);
  visited.insert(&loss.node());
  on_stack.insert(&loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (!child->requires_grad) continue;
      if (on_stack.count(child)) throw Error("cycle in gradient tape");
      if (visited.insert(child).second) {
        on_stack.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      on_stack.erase(node);
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node().accumulate(Tensor<T>::scalar(T(1)));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && node->grad) node->backward_fn(*node);
  }
}

template struct Node<float>;
template struct Node<double>;
template class Var<float>;
template class Var<double>;
template Var<float> make_result(Tensor<float>, std::vector<Var<float>>, std::function<void(Node<float>&)>);
template Var<double> make_result(Tensor<double>, std::vector<Var<double>>, std::function<void(Node<double>&)>);
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace remreg
