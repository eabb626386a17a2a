#pragma once

#include "seedselect/eval/features.hpp"

namespace seedselect::eval {

struct PrdcResult {
  double precision = 0.0, recall = 0.0;
  double density = 0.0;   // reported as fidelity
  double coverage = 0.0;  // reported as diversity
  Eigen::Index k = 0;
};

/// Squared distance from each row to its k-th nearest other row.
Eigen::VectorXd knn_radii_squared(const Features& x, Eigen::Index k);

/// k-NN manifold precision, recall, density and coverage. A point is inside
/// a manifold ball when its distance is strictly below the ball radius.
PrdcResult prdc(const Features& real, const Features& generated, Eigen::Index k);

/// Mean k-th-neighbour distance of a point set for k = 1..k_max.
std::vector<double> knn_radius_curve(const Features& x, Eigen::Index k_max);

}  // namespace seedselect::eval
