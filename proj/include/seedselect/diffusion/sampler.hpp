#pragma once

#include <vector>

#include "seedselect/core/rng.hpp"
#include "seedselect/diffusion/denoiser.hpp"

namespace seedselect::diffusion {

struct SamplerConfig {
  int steps = 7;
  double guidance_scale = 7.5;
};

/// Deterministic (eta = 0) sampling path.
template <typename S>
struct Trajectory {
  std::vector<Var<S>> latents;       // z_T, ..., z_0; steps + 1 entries
  std::vector<Var<S>> predicted_x0;  // clean-latent estimate made at each step
  std::vector<int> timesteps;        // timestep of each latent, ending with 0

  const Var<S>& final_latent() const { return latents.back(); }
  std::size_t size() const { return latents.size(); }
};

/// Runs the sampler from `seed` [N, C, h, w]. The graph stays connected to
/// the seed, so any trajectory element can be differentiated with respect to it.
template <typename S>
Trajectory<S> sample(const Denoiser<S>& model, const Var<S>& seed, const std::vector<Index>& classes,
                     const SamplerConfig& cfg);

/// Standard-normal seed batch shaped like the model's latents.
template <typename S>
Tensor<S> random_seed(const DenoiserConfig& cfg, Index n, Rng& rng);

}  // namespace seedselect::diffusion
