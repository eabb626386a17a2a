#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "seedselect/diffusion/sampler.hpp"
#include "seedselect/seed/losses.hpp"
#include "seedselect/seed/reference.hpp"
#include "seedselect/seed/stopping.hpp"

namespace seedselect::seed {

struct OptimizationConfig {
  double lambda = 0.9;
  double learning_rate = 0.05;
  int max_iters = 200;
  int patience = 3;
  int t_stab = 2;
  int sampling_steps = 7;
  double guidance_scale = 7.5;
  int plateau_window = 10;
  double plateau_tol = 1e-4;
  bool contrastive = false;
  std::uint64_t seed = 0;

  void validate() const;
  diffusion::SamplerConfig sampler() const { return {sampling_steps, guidance_scale}; }
};

struct IterationRecord {
  double total = 0.0, semantic = 0.0, appearance = 0.0, seed_norm = 0.0;
};

template <typename S>
struct OptimizedSeed {
  Tensor<S> seed;  // best recorded seed, [1, C, h, w]
  std::vector<IterationRecord> history;
  int iterations = 0;
  StopReason stop_reason = StopReason::MaxIters;
  double best_loss = 0.0;
  int best_iteration = -1;
  double final_seed_norm = 0.0;
};

/// Per-row losses of a seed batch. `total` is differentiable and [M];
/// the semantic and appearance parts are reported values.
template <typename S>
struct RowLosses {
  Var<S> total;
  std::vector<double> semantic, appearance;
};

/// Evaluates seeds [M, C, h, w]; `rows` holds the caller's index of each
/// seed row so per-row targets can be looked up.
template <typename S>
using BatchObjective = std::function<RowLosses<S>(const Var<S>& seeds, const std::vector<Index>& rows)>;

/// Independent Adam runs for each initial seed, evaluated together in one
/// batch. Each row keeps its own optimizer state and stopping rule; stopped
/// rows leave the batch, so results equal separate single-seed runs.
template <typename S>
std::vector<OptimizedSeed<S>> optimize_batch(const BatchObjective<S>& objective,
                                             const std::vector<Tensor<S>>& initial_seeds,
                                             const OptimizationConfig& cfg, int max_iters);

/// Per-row references and (for the contrastive variant) the centroid table.
template <typename S>
struct ObjectiveTargets {
  std::vector<const ReferenceSet<S>*> references;
  const models::CentroidTable<S>* centroids = nullptr;
};

/// The SeedSelect objective: lambda * (stabilized) semantic + (1 - lambda) * appearance.
template <typename S>
BatchObjective<S> seedselect_objective(const ModelStack<S>& stack, ObjectiveTargets<S> targets,
                                       const OptimizationConfig& cfg);

/// Per-row stabilized semantic loss: sum over the last t_stab + 1 steps of the
/// distance between the embedded decoded clean-latent estimate and its centroid.
template <typename S>
Var<S> stabilized_semantic_loss(const diffusion::Trajectory<S>& traj, int t_stab, const ModelStack<S>& stack,
                                const Tensor<S>& centroid_rows);

template <typename S>
Var<S> stabilized_contrastive_loss(const diffusion::Trajectory<S>& traj, int t_stab, const ModelStack<S>& stack,
                                   const models::CentroidTable<S>& centroids, const std::vector<Index>& targets);

/// Optimizes one seed against a reference set. The initial seed is drawn
/// from cfg.seed when absent.
template <typename S>
OptimizedSeed<S> optimize_seed(const ModelStack<S>& stack, const ReferenceSet<S>& refs, const OptimizationConfig& cfg,
                               const std::optional<Tensor<S>>& initial_seed = std::nullopt,
                               const models::CentroidTable<S>* centroids = nullptr);

/// Final clean latents z_0 of a seed batch.
template <typename S>
Tensor<S> generate_latents(const diffusion::Denoiser<S>& denoiser, const Tensor<S>& seeds,
                           const std::vector<Index>& classes, const diffusion::SamplerConfig& sampler,
                           Index batch = 50);

/// TSV trace: iter, total, semantic, appearance, seed_norm.
template <typename S>
void write_trace(std::ostream& out, const OptimizedSeed<S>& result);

}  // namespace seedselect::seed
