#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "athv/tensor.hpp"

namespace athv {

template <typename T>
struct Node;

template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

/// One recorded operation: its value, its accumulated gradient and the
/// inputs it was computed from. Leaves have no inputs.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn<T> backward;
  bool requires_grad = false;
  const char* op = "leaf";

  /// Gradient storage, zero-filled on first use.
  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a graph node. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;

  static Var constant(Tensor<T> value) { return Var(std::move(value), false); }
  static Var parameter(Tensor<T> value) { return Var(std::move(value), true); }

  const Tensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Gradient after backward(); zeros if nothing flowed here.
  const Tensor<T>& grad() const { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  /// Replaces a leaf's value in place (optimizer updates).
  void assign(Tensor<T> value) {
    require(value.shape() == node_->value.shape(), ErrorCode::ShapeMismatch,
            "assign " + shape_str(value.shape()) + " into " + shape_str(node_->value.shape()));
    node_->value = std::move(value);
  }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

  static Var from_node(std::shared_ptr<Node<T>> node) {
    Var v;
    v.node_ = std::move(node);
    return v;
  }

 private:
  Var(Tensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  std::shared_ptr<Node<T>> node_;
};

/// Records an operation. When no input needs a gradient the result is a
/// constant and the inputs are not retained.
template <typename T>
Var<T> record(const char* op, Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  for (const auto& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.shared());
    node->backward = std::move(backward);
  }
  return Var<T>::from_node(std::move(node));
}

/// Topologically ordered list of the nodes that need gradients; every
/// record's inputs precede it.
template <typename T>
using Tape = std::vector<Node<T>*>;

template <typename T>
Tape<T> build_tape(const Var<T>& root);

/// Reverse-mode sweep from a scalar root. Gradients accumulate into every
/// reachable node that requires one; call zero_grad on leaves between steps.
template <typename T>
void backward(const Var<T>& loss);

}  // namespace athv
