#pragma once

#include <optional>
#include <vector>

#include "seedselect/seed/optimizer.hpp"

namespace seedselect::seed {

struct BootstrapPlan {
  int warm_iters = 50;
  int subset_iters = 30;
  /// Draws per subset (with replacement); 0 means the reference set size k.
  Index subset_size = 0;
  /// Use the full reference set for every subset instead of resampling.
  bool full_subsets = false;
  /// Subsets optimized together in one batch.
  Index batch = 40;

  void validate() const;
};

template <typename S>
struct BootstrapResult {
  OptimizedSeed<S> warm;
  std::vector<OptimizedSeed<S>> subsets;
  std::vector<std::vector<Index>> draws;  // reference rows used by each subset
  Tensor<S> latents;                      // [n, C, h, w] final clean latents
  Tensor<float> images;                   // [n, 3, H, W] decoded outputs
  double warm_seconds = 0.0, subset_seconds = 0.0;

  double mean_subset_iterations() const;
};

/// Warm-start optimization on the full reference set, then one short
/// re-optimization per output image on a bootstrap subset, each starting
/// from the warm seed. The warm start begins at `initial_seed` or a draw
/// from `rng`; subsets are drawn from `rng` as well.
template <typename S>
BootstrapResult<S> bootstrap_generate(const ModelStack<S>& stack, const ReferenceSet<S>& refs, Index n_images,
                                      const BootstrapPlan& plan, const OptimizationConfig& cfg, Rng& rng,
                                      const std::optional<Tensor<S>>& initial_seed = std::nullopt,
                                      const models::CentroidTable<S>* centroids = nullptr);

}  // namespace seedselect::seed
