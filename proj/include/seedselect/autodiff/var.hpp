#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "seedselect/autodiff/tensor.hpp"

namespace seedselect::ad {

template <typename Scalar>
struct Node;

/// Backward rule: receives the node, the gradient of the loss w.r.t. the
/// node's value, and one accumulator per parent (nullptr when the parent
/// does not require a gradient). Rules must add into the accumulators.
template <typename Scalar>
using BackwardFn =
    std::function<void(const Node<Scalar>&, const Tensor<Scalar>&, std::span<Tensor<Scalar>*>)>;

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  std::vector<std::shared_ptr<const Node>> parents;
  BackwardFn<Scalar> backward;
  bool requires_grad = false;
  const char* op = "leaf";
};

/// Handle to a recorded value. Copies share the underlying node.
template <typename Scalar_>
class Var {
 public:
  using Scalar = Scalar_;
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  Var() : node_(std::make_shared<Node<Scalar>>()) {}

  /// Graph leaf. Leaves with requires_grad are the variables gradients are taken against.
  static Var leaf(Tensor<Scalar> value, bool requires_grad = true) {
    auto n = std::make_shared<Node<Scalar>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }
  static Var constant(Tensor<Scalar> value) { return leaf(std::move(value), false); }

  const Tensor<Scalar>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index dim(Index axis) const { return node_->value.dim(axis); }
  Index size() const { return node_->value.size(); }
  Scalar item() const { return node_->value.item(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  /// Toggle gradient tracking on a leaf (model freezing). Must not be
  /// called while another thread records through this leaf.
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  /// Replace a leaf's value in place (optimizer steps).
  Tensor<Scalar>& mutable_value() { return node_->value; }

  const std::shared_ptr<Node<Scalar>>& node() const { return node_; }

  explicit Var(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr node_;
};

/// Record an operation result. When no parent requires a gradient the
/// result is a constant: parents and the backward rule are dropped.
template <typename Scalar>
Var<Scalar> record(const char* op, Tensor<Scalar> value, std::initializer_list<Var<Scalar>> parents,
                   BackwardFn<Scalar> backward) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  n->op = op;
  for (const auto& p : parents) {
    if (p.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Var<Scalar>(std::move(n));
}

template <typename Scalar>
Var<Scalar> record(const char* op, Tensor<Scalar> value, const std::vector<Var<Scalar>>& parents,
                   BackwardFn<Scalar> backward) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  n->op = op;
  for (const auto& p : parents) {
    if (p.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Var<Scalar>(std::move(n));
}

/// Reverse-mode sweep from a single-element loss. Returns d loss / d leaf
/// for each requested leaf, in order; leaves the loss does not depend on
/// receive zeros.
template <typename Scalar>
std::vector<Tensor<Scalar>> backward(const Var<Scalar>& loss, std::span<const Var<Scalar>> leaves);

template <typename Scalar>
std::vector<Tensor<Scalar>> backward(const Var<Scalar>& loss, const std::vector<Var<Scalar>>& leaves) {
  return backward(loss, std::span<const Var<Scalar>>(leaves.data(), leaves.size()));
}

template <typename Scalar>
Tensor<Scalar> backward(const Var<Scalar>& loss, const Var<Scalar>& leaf) {
  return std::move(backward(loss, std::span<const Var<Scalar>>(&leaf, 1)).front());
}

}  // namespace seedselect::ad
