#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cca/error.hpp"

namespace cca::ag {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

template <std::floating_point T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  /// Propagates this node's grad into its inputs. Empty for leaves.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

/// Shared handle to a node; copies alias the same storage.
template <std::floating_point T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value.assign(numel(shape), T(0));
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (values.size() != numel(shape))
      throw Error(ErrorKind::Shape, "tensor data does not match shape " + shape_string(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->value.size(); }

  std::span<T> value() { return node_->value; }
  std::span<const T> value() const { return node_->value; }
  /// Gradient accumulator, allocated (zeroed) on first access.
  std::span<T> grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  T item() const {
    if (size() != 1) throw Error(ErrorKind::Shape, "item() on non-scalar " + shape_string(shape()));
    return node_->value[0];
  }

  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Ordered record of executed differentiable operations. Nodes are appended
/// as ops run, so reverse order is a valid topological order for backward.
template <std::floating_point T>
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  std::size_t size() const { return nodes_.size(); }

  /// Creates an op result. The node is recorded only when recording is on and
  /// some input requires grad; otherwise `backward` is discarded.
  Tensor<T> emit(Shape shape, std::vector<T> value, std::initializer_list<const Tensor<T>*> inputs,
                 const char* op, std::function<void(Node<T>&)> backward) {
    bool needs = false;
    if (enabled_)
      for (const Tensor<T>* in : inputs) needs = needs || in->requires_grad();
    return emit_if(needs, std::move(shape), std::move(value), op, std::move(backward));
  }

  Tensor<T> emit_if(bool needs, Shape shape, std::vector<T> value, const char* op,
                    std::function<void(Node<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    if (needs && enabled_) {
      n->requires_grad = true;
      n->backward = std::move(backward);
      nodes_.push_back(n);
    }
    return Tensor<T>(std::move(n));
  }

  /// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
  /// the recorded graph. Intermediate gradients are reset on every call, so
  /// repeated calls add the same contribution to the leaves again.
  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) throw Error(ErrorKind::Shape, "backward needs a scalar loss");
    for (auto& n : nodes_) n->grad.assign(n->value.size(), T(0));
    Node<T>& root = loss.node();
    root.ensure_grad();
    root.grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.backward) n.backward(n);
    }
  }

  /// Throws ErrorKind::Numeric if any recorded value or gradient is NaN/Inf.
  void check_finite() const {
    for (const auto& n : nodes_) {
      for (T v : n->value)
        if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, std::string("non-finite value in ") + n->op);
      for (T g : n->grad)
        if (!std::isfinite(g)) throw Error(ErrorKind::Numeric, std::string("non-finite gradient in ") + n->op);
    }
  }

  void clear() { nodes_.clear(); }

 private:
  bool enabled_;
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

}  // namespace cca::ag
