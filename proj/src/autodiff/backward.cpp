#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "seedselect/autodiff/var.hpp"

namespace seedselect::ad {

template <typename S>
std::vector<Tensor<S>> backward(const Var<S>& loss, std::span<const Var<S>> leaves) {
  if (loss.size() != 1) {
    throw ShapeError("backward needs a single-element loss, got shape " + shape_string(loss.shape()));
  }
  std::vector<Tensor<S>> out;
  out.reserve(leaves.size());
  for (const auto& leaf : leaves) out.push_back(Tensor<S>::zeros_like(leaf.value()));
  if (!loss.requires_grad()) return out;

  using NodeT = Node<S>;
  const NodeT* root = loss.node().get();

  // Post-order DFS restricted to nodes that carry gradients.
  std::vector<const NodeT*> order;
  std::unordered_set<const NodeT*> visited;
  std::vector<std::pair<const NodeT*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const NodeT* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_set<const NodeT*> wanted;
  for (const auto& leaf : leaves) wanted.insert(leaf.node().get());

  std::unordered_map<const NodeT*, Tensor<S>> grads;
  grads.emplace(root, Tensor<S>::ones(loss.shape()));
  std::vector<Tensor<S>*> sinks;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeT* node = *it;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    if (node->backward) {
      sinks.assign(node->parents.size(), nullptr);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        const NodeT* p = node->parents[i].get();
        if (!p->requires_grad) continue;
        auto slot = grads.try_emplace(p, Tensor<S>::zeros_like(p->value)).first;
        sinks[i] = &slot->second;
      }
      node->backward(*node, found->second, sinks);
    }
    if (!wanted.contains(node)) grads.erase(found);
  }

  for (std::size_t i = 0; i < leaves.size(); ++i) {
    auto found = grads.find(leaves[i].node().get());
    if (found != grads.end()) out[i] = found->second;
  }
  return out;
}

template std::vector<Tensor<float>> backward(const Var<float>&, std::span<const Var<float>>);
template std::vector<Tensor<double>> backward(const Var<double>&, std::span<const Var<double>>);

}  // namespace seedselect::ad
