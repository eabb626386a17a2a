#pragma once

#include <functional>

#include "seedselect/autodiff/var.hpp"

namespace seedselect::ad {

struct GradCheckResult {
  double max_relative_error = 0.0;
  Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences at `point`. Relative error per coordinate is
/// |analytic - numeric| / max(1e-12, |numeric|); the worst one is reported.
GradCheckResult grad_check_detailed(const std::function<Var<double>(const Var<double>&)>& f,
                                    const Tensor<double>& point, double epsilon);

inline double grad_check(const std::function<Var<double>(const Var<double>&)>& f, const Tensor<double>& point,
                         double epsilon) {
  return grad_check_detailed(f, point, epsilon).max_relative_error;
}

}  // namespace seedselect::ad
