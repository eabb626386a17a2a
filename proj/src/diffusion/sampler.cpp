#include "seedselect/diffusion/sampler.hpp"

#include <cmath>

namespace seedselect::diffusion {

template <typename S>
Trajectory<S> sample(const Denoiser<S>& model, const Var<S>& seed, const std::vector<Index>& classes,
                     const SamplerConfig& cfg) {
  const auto& schedule = model.schedule();
  const auto steps = schedule.sampling_timesteps(cfg.steps);
  if (static_cast<Index>(classes.size()) != seed.dim(0)) {
    throw ShapeError("sample: " + std::to_string(classes.size()) + " conditions for seed batch " +
                     shape_string(seed.shape()));
  }
  Trajectory<S> traj;
  traj.latents.push_back(seed);
  traj.timesteps.push_back(steps.front());
  Var<S> z = seed;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const int t = steps[k];
    const int t_next = k + 1 < steps.size() ? steps[k + 1] : 0;
    const double ab = schedule.alpha_bar(t);
    const double ab_next = schedule.alpha_bar(t_next);
    auto eps = model.guided_predict(z, t, classes, cfg.guidance_scale);
    auto x0 = ad::scale(ad::sub(z, ad::scale(eps, static_cast<S>(std::sqrt(1.0 - ab)))),
                        static_cast<S>(1.0 / std::sqrt(ab)));
    traj.predicted_x0.push_back(x0);
    if (t_next == 0) {
      z = x0;
    } else {
      z = ad::add(ad::scale(x0, static_cast<S>(std::sqrt(ab_next))),
                  ad::scale(eps, static_cast<S>(std::sqrt(1.0 - ab_next))));
    }
    traj.latents.push_back(z);
    traj.timesteps.push_back(t_next);
  }
  return traj;
}

template <typename S>
Tensor<S> random_seed(const DenoiserConfig& cfg, Index n, Rng& rng) {
  Tensor<S> out({n, cfg.latent_channels, cfg.latent_size, cfg.latent_size});
  for (Index i = 0; i < out.size(); ++i) out[i] = static_cast<S>(rng.normal());
  return out;
}

template Trajectory<float> sample(const Denoiser<float>&, const Var<float>&, const std::vector<Index>&,
                                  const SamplerConfig&);
template Trajectory<double> sample(const Denoiser<double>&, const Var<double>&, const std::vector<Index>&,
                                   const SamplerConfig&);
template Tensor<float> random_seed(const DenoiserConfig&, Index, Rng&);
template Tensor<double> random_seed(const DenoiserConfig&, Index, Rng&);

}  // namespace seedselect::diffusion
