#pragma once

#include <map>
#include <vector>

#include "seedselect/autodiff/ops.hpp"

namespace seedselect::seed {

using ad::Index;
using ad::Shape;
using ad::Tensor;
using ad::Var;

/// Euclidean (not squared) distance between an embedding and a centroid.
/// v is [D] or [1, D]; mu is [D].
template <typename S>
Var<S> semantic_loss(const Var<S>& v, const Tensor<S>& mu);

/// Row-wise semantic loss of [N, D] embeddings against [N, D] centroids -> [N].
template <typename S>
Var<S> semantic_loss_rows(const Var<S>& v, const Tensor<S>& mu_rows);

/// Mean over the k references of the latent MSE: (1/k) sum_i MSE(z^i, z0).
/// z0 is [1, C, h, w] (or [C, h, w]); references are [k, C, h, w].
template <typename S>
Var<S> appearance_loss(const Var<S>& z0, const Tensor<S>& references);

/// lambda * semantic + (1 - lambda) * appearance; lambda in [0, 1].
template <typename S>
Var<S> total_loss(const Var<S>& semantic, const Var<S>& appearance, double lambda);

/// -log softmax(-dist) at the target class over a centroid table.
template <typename S>
Var<S> contrastive_semantic_loss(const Var<S>& v, const std::map<Index, Tensor<S>>& centroids, Index target);

/// Row-wise contrastive loss of [N, D] embeddings with per-row targets -> [N].
template <typename S>
Var<S> contrastive_semantic_loss_rows(const Var<S>& v, const std::map<Index, Tensor<S>>& centroids,
                                      const std::vector<Index>& targets);

}  // namespace seedselect::seed
