#include "seedselect/seed/optimizer.hpp"

#include <cmath>
#include <ostream>

#include "seedselect/autodiff/adam.hpp"
#include "seedselect/io/metadata.hpp"
#include "seedselect/nn/layers.hpp"

namespace seedselect::seed {

void OptimizationConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (sampling_steps < 1) throw std::invalid_argument("sampling steps must be >= 1");
  if (t_stab < 0 || t_stab >= sampling_steps) {
    throw std::invalid_argument("t_stab " + std::to_string(t_stab) + " must be below the sampling steps (" +
                                std::to_string(sampling_steps) + ")");
  }
}

namespace {

template <typename S>
double norm_of(const Tensor<S>& t) {
  double acc = 0.0;
  for (Index i = 0; i < t.size(); ++i) acc += static_cast<double>(t[i]) * static_cast<double>(t[i]);
  return std::sqrt(acc);
}

/// Clean-latent estimates of the last t_stab + 1 steps, stacked step-major.
template <typename S>
Var<S> trailing_estimates(const diffusion::Trajectory<S>& traj, int t_stab) {
  const int steps = static_cast<int>(traj.predicted_x0.size());
  if (t_stab < 0 || t_stab >= steps) {
    throw std::invalid_argument("t_stab " + std::to_string(t_stab) + " out of range for " + std::to_string(steps) +
                                " sampling steps");
  }
  std::vector<Var<S>> parts(traj.predicted_x0.end() - (t_stab + 1), traj.predicted_x0.end());
  return parts.size() == 1 ? parts.front() : ad::concat(parts, 0);
}

template <typename S>
Var<S> sum_over_steps(const Var<S>& per_row, int t_stab, Index rows) {
  if (t_stab == 0) return per_row;
  return ad::sum(ad::reshape(per_row, {static_cast<Index>(t_stab + 1), rows}), 0);
}

template <typename S>
Tensor<S> tile_rows(const Tensor<S>& rows, int times) {
  const Index m = rows.dim(0), d = rows.dim(1);
  Tensor<S> out({m * times, d});
  for (int t = 0; t < times; ++t) std::copy_n(rows.ptr(), m * d, out.ptr() + t * m * d);
  return out;
}

}  // namespace

template <typename S>
Var<S> stabilized_semantic_loss(const diffusion::Trajectory<S>& traj, int t_stab, const ModelStack<S>& stack,
                                const Tensor<S>& centroid_rows) {
  const Index m = traj.final_latent().dim(0);
  auto images = stack.autoencoder->decode(trailing_estimates(traj, t_stab));
  auto emb = stack.embedder->embed(images);
  return sum_over_steps(semantic_loss_rows(emb, tile_rows(centroid_rows, t_stab + 1)), t_stab, m);
}

template <typename S>
Var<S> stabilized_contrastive_loss(const diffusion::Trajectory<S>& traj, int t_stab, const ModelStack<S>& stack,
                                   const models::CentroidTable<S>& centroids, const std::vector<Index>& targets) {
  const Index m = traj.final_latent().dim(0);
  auto images = stack.autoencoder->decode(trailing_estimates(traj, t_stab));
  auto emb = stack.embedder->embed(images);
  std::vector<Index> tiled;
  for (int t = 0; t <= t_stab; ++t) tiled.insert(tiled.end(), targets.begin(), targets.end());
  return sum_over_steps(contrastive_semantic_loss_rows(emb, centroids, tiled), t_stab, m);
}

template <typename S>
BatchObjective<S> seedselect_objective(const ModelStack<S>& stack, ObjectiveTargets<S> targets,
                                       const OptimizationConfig& cfg) {
  cfg.validate();
  if (cfg.contrastive && targets.centroids == nullptr) {
    throw std::invalid_argument("contrastive objective needs a centroid table");
  }
  return [stack, targets, cfg](const Var<S>& seeds, const std::vector<Index>& rows) {
    const Index m = seeds.dim(0);
    std::vector<Index> classes;
    const Index d = stack.embedder->config().embed_dim;
    Tensor<S> mu({m, d});
    for (Index i = 0; i < m; ++i) {
      const auto* ref = targets.references.at(static_cast<std::size_t>(rows[static_cast<std::size_t>(i)]));
      classes.push_back(ref->target_class());
      std::copy_n(ref->centroid().ptr(), d, mu.ptr() + i * d);
    }
    const auto traj = diffusion::sample(*stack.denoiser, seeds, classes, cfg.sampler());
    const Var<S> semantic = cfg.contrastive
                                ? stabilized_contrastive_loss(traj, cfg.t_stab, stack, *targets.centroids, classes)
                                : stabilized_semantic_loss(traj, cfg.t_stab, stack, mu);
    std::vector<Var<S>> app_rows;
    for (Index i = 0; i < m; ++i) {
      const auto* ref = targets.references.at(static_cast<std::size_t>(rows[static_cast<std::size_t>(i)]));
      app_rows.push_back(appearance_loss(ad::slice(traj.final_latent(), 0, i, 1), ref->latents()));
    }
    const Var<S> appearance = m == 1 ? app_rows.front() : ad::concat(app_rows, 0);
    RowLosses<S> out;
    out.total = total_loss(semantic, appearance, cfg.lambda);
    for (Index i = 0; i < m; ++i) {
      out.semantic.push_back(static_cast<double>(semantic.value()[i]));
      out.appearance.push_back(static_cast<double>(appearance.value()[i]));
    }
    return out;
  };
}

template <typename S>
std::vector<OptimizedSeed<S>> optimize_batch(const BatchObjective<S>& objective,
                                             const std::vector<Tensor<S>>& initial_seeds,
                                             const OptimizationConfig& cfg, int max_iters) {
  cfg.validate();
  const std::size_t n = initial_seeds.size();
  std::vector<OptimizedSeed<S>> results(n);
  std::vector<Var<S>> leaves;
  std::vector<ad::Adam<S>> opts;
  std::vector<StopRule> rules;
  std::vector<Index> active;
  for (std::size_t i = 0; i < n; ++i) {
    if (initial_seeds[i].rank() != 4 || initial_seeds[i].dim(0) != 1) {
      throw ShapeError("seed must be [1, C, h, w], got " + shape_string(initial_seeds[i].shape()));
    }
    leaves.push_back(Var<S>::leaf(initial_seeds[i], true));
    opts.emplace_back(std::vector<Var<S>>{leaves.back()}, ad::AdamConfig{cfg.learning_rate});
    rules.emplace_back(max_iters, cfg.patience, cfg.plateau_window, cfg.plateau_tol);
    results[i].seed = initial_seeds[i];
    results[i].final_seed_norm = norm_of(initial_seeds[i]);
    if (max_iters > 0) active.push_back(static_cast<Index>(i));
  }
  while (!active.empty()) {
    std::vector<Var<S>> parts;
    for (Index r : active) parts.push_back(leaves[static_cast<std::size_t>(r)]);
    const Var<S> batch = parts.size() == 1 ? parts.front() : ad::concat(parts, 0);
    const RowLosses<S> losses = objective(batch, active);
    std::vector<Index> still;
    std::vector<Var<S>> stepping;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const auto r = static_cast<std::size_t>(active[j]);
      auto& res = results[r];
      const Tensor<S>& current = leaves[r].value();
      IterationRecord rec{static_cast<double>(losses.total.value()[static_cast<Index>(j)]), losses.semantic[j],
                          losses.appearance[j], norm_of(current)};
      res.history.push_back(rec);
      res.iterations = static_cast<int>(res.history.size());
      const auto stop = rules[r].update(rec.total);
      if (std::isfinite(rec.total) && rules[r].best_index() == res.iterations - 1) {
        res.seed = current;
        res.best_loss = rec.total;
        res.best_iteration = res.iterations - 1;
      }
      if (stop) {
        res.stop_reason = *stop;
        res.final_seed_norm = norm_of(res.seed);
      } else {
        still.push_back(static_cast<Index>(r));
      }
      stepping.push_back(leaves[r]);
    }
    if (!still.empty()) {
      const auto grads = ad::backward(ad::sum(losses.total), stepping);
      for (std::size_t j = 0; j < active.size(); ++j) {
        const auto r = static_cast<std::size_t>(active[j]);
        if (std::find(still.begin(), still.end(), active[j]) == still.end()) continue;
        opts[r].step({grads[j]});
      }
    }
    active = std::move(still);
  }
  return results;
}

template <typename S>
OptimizedSeed<S> optimize_seed(const ModelStack<S>& stack, const ReferenceSet<S>& refs, const OptimizationConfig& cfg,
                               const std::optional<Tensor<S>>& initial_seed,
                               const models::CentroidTable<S>* centroids) {
  Tensor<S> init;
  if (initial_seed) {
    init = *initial_seed;
  } else {
    Rng rng(cfg.seed);
    init = diffusion::random_seed<S>(stack.denoiser->config(), 1, rng);
  }
  ObjectiveTargets<S> targets{{&refs}, centroids};
  return optimize_batch(seedselect_objective(stack, targets, cfg), {init}, cfg, cfg.max_iters).front();
}

template <typename S>
Tensor<S> generate_latents(const diffusion::Denoiser<S>& denoiser, const Tensor<S>& seeds,
                           const std::vector<Index>& classes, const diffusion::SamplerConfig& sampler, Index batch) {
  const Index n = seeds.dim(0);
  Tensor<S> out(seeds.shape());
  const Index per = seeds.size() / n;
  for (Index start = 0; start < n; start += batch) {
    const Index end = std::min(n, start + batch);
    std::vector<Index> rows;
    for (Index i = start; i < end; ++i) rows.push_back(i);
    std::vector<Index> cls(classes.begin() + start, classes.begin() + end);
    const auto traj = diffusion::sample(denoiser, Var<S>::constant(nn::gather(seeds, rows)), cls, sampler);
    std::copy_n(traj.final_latent().value().ptr(), (end - start) * per, out.ptr() + start * per);
  }
  return out;
}

template <typename S>
void write_trace(std::ostream& out, const OptimizedSeed<S>& result) {
  out << "iter\ttotal\tsemantic\tappearance\tseed_norm\n";
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const auto& h = result.history[i];
    out << i << '\t' << io::format_double(h.total) << '\t' << io::format_double(h.semantic) << '\t'
        << io::format_double(h.appearance) << '\t' << io::format_double(h.seed_norm) << '\n';
  }
}

#define SEEDSELECT_INSTANTIATE(S)                                                                                 \
  template Var<S> stabilized_semantic_loss(const diffusion::Trajectory<S>&, int, const ModelStack<S>&,            \
                                           const Tensor<S>&);                                                     \
  template Var<S> stabilized_contrastive_loss(const diffusion::Trajectory<S>&, int, const ModelStack<S>&,         \
                                              const models::CentroidTable<S>&, const std::vector<Index>&);        \
  template BatchObjective<S> seedselect_objective(const ModelStack<S>&, ObjectiveTargets<S>,                      \
                                                  const OptimizationConfig&);                                     \
  template std::vector<OptimizedSeed<S>> optimize_batch(const BatchObjective<S>&, const std::vector<Tensor<S>>&,  \
                                                        const OptimizationConfig&, int);                          \
  template OptimizedSeed<S> optimize_seed(const ModelStack<S>&, const ReferenceSet<S>&,                           \
                                          const OptimizationConfig&, const std::optional<Tensor<S>>&,             \
                                          const models::CentroidTable<S>*);                                       \
  template Tensor<S> generate_latents(const diffusion::Denoiser<S>&, const Tensor<S>&, const std::vector<Index>&, \
                                      const diffusion::SamplerConfig&, Index);                                    \
  template void write_trace(std::ostream&, const OptimizedSeed<S>&);
SEEDSELECT_INSTANTIATE(float)
SEEDSELECT_INSTANTIATE(double)
#undef SEEDSELECT_INSTANTIATE

}  // namespace seedselect::seed
