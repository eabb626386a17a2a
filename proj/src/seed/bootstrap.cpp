#include "seedselect/seed/bootstrap.hpp"

#include <chrono>

#include "seedselect/nn/layers.hpp"

namespace seedselect::seed {

void BootstrapPlan::validate() const {
  if (warm_iters < 0 || subset_iters < 0) throw std::invalid_argument("bootstrap budgets must be >= 0");
  if (subset_size < 0) throw std::invalid_argument("bootstrap subset size must be >= 0");
  if (batch < 1) throw std::invalid_argument("bootstrap batch must be >= 1");
}

template <typename S>
double BootstrapResult<S>::mean_subset_iterations() const {
  if (subsets.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : subsets) total += s.iterations;
  return total / static_cast<double>(subsets.size());
}

template <typename S>
BootstrapResult<S> bootstrap_generate(const ModelStack<S>& stack, const ReferenceSet<S>& refs, Index n_images,
                                      const BootstrapPlan& plan, const OptimizationConfig& cfg, Rng& rng,
                                      const std::optional<Tensor<S>>& initial_seed,
                                      const models::CentroidTable<S>* centroids) {
  using Clock = std::chrono::steady_clock;
  if (n_images < 1) throw std::invalid_argument("bootstrap needs n_images >= 1");
  plan.validate();
  cfg.validate();
  BootstrapResult<S> out;

  const auto t0 = Clock::now();
  const Tensor<S> start = initial_seed ? *initial_seed : diffusion::random_seed<S>(stack.denoiser->config(), 1, rng);
  {
    ObjectiveTargets<S> targets{{&refs}, centroids};
    out.warm = optimize_batch(seedselect_objective(stack, targets, cfg), {start}, cfg, plan.warm_iters).front();
  }
  const auto t1 = Clock::now();

  const Index k = plan.subset_size > 0 ? plan.subset_size : refs.size();
  std::vector<ReferenceSet<S>> subsets;
  subsets.reserve(static_cast<std::size_t>(n_images));
  for (Index i = 0; i < n_images; ++i) {
    std::vector<Index> rows;
    for (Index j = 0; j < (plan.full_subsets ? refs.size() : k); ++j) {
      rows.push_back(plan.full_subsets ? j : static_cast<Index>(rng.below(static_cast<std::uint64_t>(refs.size()))));
    }
    out.draws.push_back(rows);
    subsets.push_back(refs.subset(rows));
  }
  for (Index start_row = 0; start_row < n_images; start_row += plan.batch) {
    const Index end = std::min(n_images, start_row + plan.batch);
    ObjectiveTargets<S> targets{{}, centroids};
    for (Index i = start_row; i < end; ++i) targets.references.push_back(&subsets[static_cast<std::size_t>(i)]);
    const std::vector<Tensor<S>> inits(static_cast<std::size_t>(end - start_row), out.warm.seed);
    auto chunk = optimize_batch(seedselect_objective(stack, targets, cfg), inits, cfg, plan.subset_iters);
    for (auto& r : chunk) out.subsets.push_back(std::move(r));
  }
  const auto t2 = Clock::now();

  std::vector<Tensor<S>> seeds;
  for (const auto& s : out.subsets) seeds.push_back(s.seed);
  const std::vector<Index> classes(static_cast<std::size_t>(n_images), refs.target_class());
  out.latents = generate_latents(*stack.denoiser, nn::stack(seeds), classes, cfg.sampler());
  out.images = diffusion::decode_all(*stack.autoencoder, out.latents).template cast<float>();
  out.warm_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.subset_seconds = std::chrono::duration<double>(t2 - t1).count();
  return out;
}

template struct BootstrapResult<float>;
template struct BootstrapResult<double>;
template BootstrapResult<float> bootstrap_generate(const ModelStack<float>&, const ReferenceSet<float>&, Index,
                                                   const BootstrapPlan&, const OptimizationConfig&, Rng&,
                                                   const std::optional<Tensor<float>>&,
                                                   const models::CentroidTable<float>*);
template BootstrapResult<double> bootstrap_generate(const ModelStack<double>&, const ReferenceSet<double>&, Index,
                                                    const BootstrapPlan&, const OptimizationConfig&, Rng&,
                                                    const std::optional<Tensor<double>>&,
                                                    const models::CentroidTable<double>*);

}  // namespace seedselect::seed
