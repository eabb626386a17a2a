#include "seedselect/diffusion/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace seedselect::diffusion {

NoiseSchedule::NoiseSchedule(int train_steps, double beta_start, double beta_end)
    : train_steps_(train_steps), beta_start_(beta_start), beta_end_(beta_end) {
  if (train_steps < 1) throw std::invalid_argument("noise schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    throw std::invalid_argument("betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  betas_.assign(static_cast<std::size_t>(train_steps) + 1, 0.0);
  alpha_bars_.assign(static_cast<std::size_t>(train_steps) + 1, 1.0);
  for (int t = 1; t <= train_steps; ++t) {
    const double frac = train_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (train_steps - 1);
    betas_[static_cast<std::size_t>(t)] = beta_start + frac * (beta_end - beta_start);
    alpha_bars_[static_cast<std::size_t>(t)] =
        alpha_bars_[static_cast<std::size_t>(t - 1)] * (1.0 - betas_[static_cast<std::size_t>(t)]);
  }
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > train_steps_) throw std::out_of_range("beta index " + std::to_string(t) + " out of range");
  return betas_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > train_steps_) {
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, " + std::to_string(train_steps_) + "]");
  }
  return alpha_bars_[static_cast<std::size_t>(t)];
}

std::vector<int> NoiseSchedule::sampling_timesteps(int steps) const {
  if (steps < 1) throw std::invalid_argument("sampling needs at least one step");
  if (steps > train_steps_) {
    throw std::invalid_argument("sampling steps " + std::to_string(steps) + " exceed training steps " +
                                std::to_string(train_steps_));
  }
  std::vector<int> ts;
  for (int k = steps; k >= 1; --k) {
    ts.push_back(static_cast<int>((static_cast<long long>(k) * train_steps_) / steps));
  }
  return ts;
}

template <typename S>
ad::Var<S> add_noise(const ad::Var<S>& z0, int t, const ad::Var<S>& epsilon, const NoiseSchedule& schedule) {
  return add_noise_at(z0, schedule.alpha_bar(t), epsilon);
}

template <typename S>
ad::Var<S> add_noise_at(const ad::Var<S>& z0, double ab, const ad::Var<S>& epsilon) {
  if (z0.shape() != epsilon.shape()) {
    throw ShapeError("add_noise: latent " + shape_string(z0.shape()) + " vs noise " + shape_string(epsilon.shape()));
  }
  if (!(ab >= 0.0 && ab <= 1.0)) throw std::invalid_argument("alpha_bar must lie in [0, 1]");
  return ad::add(ad::scale(z0, static_cast<S>(std::sqrt(ab))), ad::scale(epsilon, static_cast<S>(std::sqrt(1.0 - ab))));
}

template <typename S>
ad::Var<S> add_noise(const ad::Var<S>& z0, const std::vector<int>& t, const ad::Var<S>& epsilon,
                     const NoiseSchedule& schedule) {
  if (z0.shape() != epsilon.shape() || z0.dim(0) != static_cast<ad::Index>(t.size())) {
    throw ShapeError("add_noise: latent " + shape_string(z0.shape()) + " vs noise " + shape_string(epsilon.shape()) +
                     " with " + std::to_string(t.size()) + " timesteps");
  }
  ad::Shape coef_shape(z0.shape().size(), 1);
  coef_shape[0] = z0.dim(0);
  ad::Tensor<S> a(coef_shape), b(coef_shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ab = schedule.alpha_bar(t[i]);
    a[static_cast<ad::Index>(i)] = static_cast<S>(std::sqrt(ab));
    b[static_cast<ad::Index>(i)] = static_cast<S>(std::sqrt(1.0 - ab));
  }
  return ad::add(ad::mul(z0, ad::Var<S>::constant(std::move(a))), ad::mul(epsilon, ad::Var<S>::constant(std::move(b))));
}

template ad::Var<float> add_noise_at(const ad::Var<float>&, double, const ad::Var<float>&);
template ad::Var<double> add_noise_at(const ad::Var<double>&, double, const ad::Var<double>&);
template ad::Var<float> add_noise(const ad::Var<float>&, int, const ad::Var<float>&, const NoiseSchedule&);
template ad::Var<double> add_noise(const ad::Var<double>&, int, const ad::Var<double>&, const NoiseSchedule&);
template ad::Var<float> add_noise(const ad::Var<float>&, const std::vector<int>&, const ad::Var<float>&,
                                  const NoiseSchedule&);
template ad::Var<double> add_noise(const ad::Var<double>&, const std::vector<int>&, const ad::Var<double>&,
                                   const NoiseSchedule&);

}  // namespace seedselect::diffusion
