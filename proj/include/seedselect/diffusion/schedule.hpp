#pragma once

#include <vector>

#include "seedselect/autodiff/ops.hpp"

namespace seedselect::diffusion {

/// Linear beta schedule with cumulative products. Index t runs over
/// 1..T for steps; alpha_bar(0) = 1 denotes the clean latent.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(int train_steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2);

  int train_steps() const { return train_steps_; }
  double beta(int t) const;
  double alpha_bar(int t) const;
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  /// Evenly spaced sub-sequence of the training steps, descending, ending
  /// before 0: floor(k * T / steps) for k = steps..1.
  std::vector<int> sampling_timesteps(int steps) const;

 private:
  int train_steps_;
  double beta_start_, beta_end_;
  std::vector<double> betas_;       // index t (0 unused)
  std::vector<double> alpha_bars_;  // index t, alpha_bars_[0] = 1
};

/// z_t = sqrt(alpha_bar) * z0 + sqrt(1 - alpha_bar) * epsilon.
template <typename S>
ad::Var<S> add_noise_at(const ad::Var<S>& z0, double alpha_bar, const ad::Var<S>& epsilon);

/// add_noise_at with alpha_bar = schedule.alpha_bar(t); t in [0, T].
template <typename S>
ad::Var<S> add_noise(const ad::Var<S>& z0, int t, const ad::Var<S>& epsilon, const NoiseSchedule& schedule);

/// Per-row timesteps for a batch [N, ...].
template <typename S>
ad::Var<S> add_noise(const ad::Var<S>& z0, const std::vector<int>& t, const ad::Var<S>& epsilon,
                     const NoiseSchedule& schedule);

}  // namespace seedselect::diffusion
