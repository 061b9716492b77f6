#include "athv/autodiff.hpp"

#include <unordered_set>

namespace athv {

template <typename T>
Tape<T> build_tape(const Var<T>& root) {
  Tape<T> order;
  if (!root.requires_grad()) return order;
  std::unordered_set<const Node<T>*> visited;
  // Iterative post-order DFS; deep unrolled graphs would overflow recursion.
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

template <typename T>
void backward(const Var<T>& loss) {
  require(loss.size() == 1, ErrorCode::ShapeMismatch,
          "backward() needs a scalar root, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  const Tape<T> tape = build_tape(loss);
  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template Tape<float> build_tape(const Var<float>&);
template Tape<double> build_tape(const Var<double>&);
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace athv
