#pragma once

// Reverse-mode autodiff tensor. A Tensor is a shared handle to a graph node
// holding a dense row-major value and, once requested, its gradient. Ops in
// ops.hpp record a backward closure on their output node whenever any input
// requires a gradient; Tensor::backward() replays them in reverse
// topological order.

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

namespace earcount::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Index numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct Node {
  Shape shape;
  Vector<Scalar> value;
  Vector<Scalar> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Eigen::Ref<const Vector<Scalar>>& delta) {
    if (grad.size() == 0) {
      grad = delta;
    } else {
      grad += delta;
    }
  }
  Vector<Scalar>& grad_buffer() {
    if (grad.size() == 0) grad = Vector<Scalar>::Zero(value.size());
    return grad;
  }
};

template <typename Scalar>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const Index n = numel(shape);
    return from(std::move(shape), Vector<Scalar>::Zero(n), requires_grad);
  }
  static Tensor constant(Shape shape, Scalar v, bool requires_grad = false) {
    const Index n = numel(shape);
    return from(std::move(shape), Vector<Scalar>::Constant(n, v), requires_grad);
  }
  static Tensor from(Shape shape, Vector<Scalar> values, bool requires_grad = false) {
    if (numel(shape) != values.size()) {
      throw ShapeError("value count does not match shape " + to_string(shape));
    }
    auto node = std::make_shared<Node<Scalar>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  Index dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  Index size() const { return node_->value.size(); }

  Vector<Scalar>& value() { return node_->value; }
  const Vector<Scalar>& value() const { return node_->value; }
  /// Gradient; zeros if backward never reached this tensor.
  const Vector<Scalar>& grad() const { return node_->grad_buffer(); }
  Vector<Scalar>& grad() { return node_->grad_buffer(); }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  Scalar item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }

  /// Leaf copy of the value with no history.
  Tensor detach() const { return from(shape(), value(), false); }

  const NodePtr& node() const { return node_; }

  /// Backpropagates from this tensor, seeding its gradient with ones.
  void backward() const { backward(Vector<Scalar>::Ones(size())); }

  void backward(const Vector<Scalar>& seed) const {
    if (seed.size() != size()) throw ShapeError("backward seed size mismatch");
    std::vector<Node<Scalar>*> order;
    std::unordered_set<Node<Scalar>*> seen;
    // iterative post-order DFS
    std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node<Scalar>* p = n->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    node_->accumulate(seed);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<Scalar>* n = *it;
      if (n->backward && n->grad.size() != 0) n->backward(*n);
    }
  }

 private:
  NodePtr node_;
};

/// Creates the output node of an op. When no input requires a gradient the
/// node carries no history.
template <typename Scalar>
Tensor<Scalar> make_result(Shape shape, Vector<Scalar> value,
                           std::initializer_list<Tensor<Scalar>> inputs,
                           std::function<void(Node<Scalar>&)> backward) {
  auto node = std::make_shared<Node<Scalar>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.defined() && in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const auto& in : inputs) {
      if (in.defined()) node->parents.push_back(in.node());
    }
    node->backward = std::move(backward);
  }
  return Tensor<Scalar>(std::move(node));
}

}  // namespace earcount::nn
