#include "seedselect/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace seedselect::ad {

GradCheckResult grad_check_detailed(const std::function<Var<double>(const Var<double>&)>& f,
                                    const Tensor<double>& point, double epsilon) {
  const Var<double> x = Var<double>::leaf(point, true);
  const Tensor<double> analytic = backward(f(x), x);

  GradCheckResult result;
  Tensor<double> probe = point;
  for (Index i = 0; i < point.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + epsilon;
    const double up = f(Var<double>::constant(probe)).item();
    probe[i] = orig - epsilon;
    const double down = f(Var<double>::constant(probe)).item();
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double err = std::abs(analytic[i] - numeric) / std::max(1e-12, std::abs(numeric));
    if (i == 0 || err > result.max_relative_error) {
      result = {err, i, analytic[i], numeric};
    }
  }
  return result;
}

}  // namespace seedselect::ad
