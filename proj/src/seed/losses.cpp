#include "seedselect/seed/losses.hpp"

#include <stdexcept>
#include <string>

#include "seedselect/core/error.hpp"

namespace seedselect::seed {

namespace {

template <typename S>
Var<S> as_row(const Var<S>& v) {
  if (v.shape().size() == 1) return ad::reshape(v, {1, v.dim(0)});
  if (v.shape().size() == 2 && v.dim(0) == 1) return v;
  throw ShapeError("expected a single embedding [D] or [1, D], got " + shape_string(v.shape()));
}

template <typename S>
void check_dim(const Var<S>& rows, const Tensor<S>& mu) {
  if (mu.rank() != 1 || mu.dim(0) != rows.dim(1)) {
    throw ShapeError("embedding " + shape_string(rows.shape()) + " vs centroid " + shape_string(mu.shape()));
  }
}

}  // namespace

template <typename S>
Var<S> semantic_loss_rows(const Var<S>& v, const Tensor<S>& mu_rows) {
  if (v.shape() != mu_rows.shape() || v.shape().size() != 2) {
    throw ShapeError("embeddings " + shape_string(v.shape()) + " vs centroids " + shape_string(mu_rows.shape()));
  }
  auto d = ad::sub(Var<S>::constant(mu_rows), v);
  return ad::sqrt(ad::sum(ad::square(d), 1));
}

template <typename S>
Var<S> semantic_loss(const Var<S>& v, const Tensor<S>& mu) {
  auto row = as_row(v);
  check_dim(row, mu);
  return ad::reshape(semantic_loss_rows(row, mu.reshaped({1, mu.dim(0)})), {1});
}

template <typename S>
Var<S> appearance_loss(const Var<S>& z0, const Tensor<S>& references) {
  if (references.rank() < 2) throw ShapeError("references need a leading k axis, got " + shape_string(references.shape()));
  const Index k = references.dim(0);
  const Index per = references.size() / k;
  Shape ref_item(references.shape().begin() + 1, references.shape().end());
  Shape z_item = z0.shape();
  if (z_item.size() == ref_item.size() + 1 && z_item.front() == 1) z_item.erase(z_item.begin());
  if (z_item != ref_item) {
    throw ShapeError("appearance loss: latent " + shape_string(z0.shape()) + " vs references " +
                     shape_string(references.shape()));
  }
  auto diff = ad::sub(Var<S>::constant(references.reshaped({k, per})), ad::reshape(z0, {1, per}));
  return ad::reshape(ad::mean(ad::square(diff)), {1});
}

template <typename S>
Var<S> total_loss(const Var<S>& semantic, const Var<S>& appearance, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (lambda == 1.0) return semantic;
  if (lambda == 0.0) return appearance;
  return ad::add(ad::scale(semantic, static_cast<S>(lambda)), ad::scale(appearance, static_cast<S>(1.0 - lambda)));
}

template <typename S>
Var<S> contrastive_semantic_loss_rows(const Var<S>& v, const std::map<Index, Tensor<S>>& centroids,
                                      const std::vector<Index>& targets) {
  if (centroids.empty()) throw std::invalid_argument("contrastive loss needs at least one class centroid");
  const Index n = v.dim(0), d = v.dim(1);
  if (static_cast<Index>(targets.size()) != n) throw ShapeError("contrastive loss: one target per embedding row");
  const Index c = static_cast<Index>(centroids.size());
  std::vector<Index> target_col;
  for (Index t : targets) {
    auto it = centroids.find(t);
    if (it == centroids.end()) throw std::invalid_argument("target class " + std::to_string(t) + " has no centroid");
    target_col.push_back(static_cast<Index>(std::distance(centroids.begin(), it)));
  }
  // dist[i, j] = || mu_j - v_i ||
  Tensor<S> table({1, c, d});
  Index j = 0;
  for (const auto& [cls, mu] : centroids) {
    if (mu.rank() != 1 || mu.dim(0) != d) {
      throw ShapeError("centroid of class " + std::to_string(cls) + " is " + shape_string(mu.shape()) + ", embeddings " +
                       shape_string(v.shape()));
    }
    std::copy_n(mu.ptr(), d, table.ptr() + j * d);
    ++j;
  }
  auto diff = ad::sub(Var<S>::constant(std::move(table)), ad::reshape(v, {n, 1, d}));
  auto dist = ad::sqrt(ad::sum(ad::square(diff), 2));  // [n, c]
  auto logp = ad::log_softmax(ad::neg(dist));
  Tensor<S> pick({n, c});
  for (Index i = 0; i < n; ++i) pick[i * c + target_col[static_cast<std::size_t>(i)]] = S(1);
  return ad::neg(ad::sum(ad::mul(logp, Var<S>::constant(std::move(pick))), 1));
}

template <typename S>
Var<S> contrastive_semantic_loss(const Var<S>& v, const std::map<Index, Tensor<S>>& centroids, Index target) {
  return contrastive_semantic_loss_rows(as_row(v), centroids, {target});
}

#define SEEDSELECT_INSTANTIATE(S)                                                                         \
  template Var<S> semantic_loss(const Var<S>&, const Tensor<S>&);                                         \
  template Var<S> semantic_loss_rows(const Var<S>&, const Tensor<S>&);                                    \
  template Var<S> appearance_loss(const Var<S>&, const Tensor<S>&);                                       \
  template Var<S> total_loss(const Var<S>&, const Var<S>&, double);                                       \
  template Var<S> contrastive_semantic_loss(const Var<S>&, const std::map<Index, Tensor<S>>&, Index);     \
  template Var<S> contrastive_semantic_loss_rows(const Var<S>&, const std::map<Index, Tensor<S>>&,        \
                                                 const std::vector<Index>&);
SEEDSELECT_INSTANTIATE(float)
SEEDSELECT_INSTANTIATE(double)
#undef SEEDSELECT_INSTANTIATE

}  // namespace seedselect::seed
