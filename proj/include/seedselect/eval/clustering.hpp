#pragma once

#include <cstdint>
#include <vector>

#include "seedselect/eval/features.hpp"

namespace seedselect::eval {

struct KMeansResult {
  Features centroids;                    // k x D
  std::vector<Eigen::Index> assignment;  // per input row
  double inertia = 0.0;                  // sum of squared distances to assigned centroid
};

/// Seeded k-means++ initialization followed by Lloyd iterations.
KMeansResult kmeans(const Features& x, Eigen::Index k, std::uint64_t seed, int max_iters = 100, int restarts = 1);

/// Index of the nearest centroid (lowest index on ties).
Eigen::Index nearest_centroid(const Features& centroids, const Features& x, Eigen::Index row);

/// Inertia for k = 1..k_max, made non-increasing by a running minimum.
std::vector<double> inertia_curve(const Features& x, Eigen::Index k_max, std::uint64_t seed, int restarts = 3);

/// Curve index k (1-based) maximizing the second difference
/// c[k-1] - 2 c[k] + c[k+1] over interior points; ties go to the smallest k.
/// Throws on an increasing segment or fewer than 3 points.
Eigen::Index elbow(const std::vector<double>& curve);

}  // namespace seedselect::eval
