#include "seedselect/eval/ndb.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "seedselect/core/log.hpp"
#include "seedselect/eval/clustering.hpp"

namespace seedselect::eval {

double normal_critical_value(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  // Solve erfc(z / sqrt 2) = alpha by bisection; erfc is decreasing.
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > alpha) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

NdbResult ndb(const Features& real, const Features& generated, Eigen::Index n_bins, double alpha, std::uint64_t seed) {
  if (n_bins < 2) throw std::invalid_argument("NDB needs at least 2 bins");
  if (real.rows() < n_bins || generated.rows() < n_bins) {
    throw std::invalid_argument("NDB with " + std::to_string(n_bins) + " bins needs at least that many points per set");
  }
  if (real.cols() != generated.cols()) throw ShapeError("NDB: feature dimensions differ");
  KMeansResult km = kmeans(real, n_bins, seed);

  // Drop centroids that own no real point; their members (none) and any
  // generated points fall to the nearest remaining bin.
  std::vector<int> real_counts(static_cast<std::size_t>(n_bins), 0);
  for (auto a : km.assignment) ++real_counts[static_cast<std::size_t>(a)];
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < n_bins; ++c) {
    if (real_counts[static_cast<std::size_t>(c)] > 0) keep.push_back(c);
  }
  NdbResult res;
  res.merged = static_cast<int>(n_bins - static_cast<Eigen::Index>(keep.size()));
  if (res.merged > 0) log::info("NDB merged " + std::to_string(res.merged) + " empty bin(s) into their neighbours");
  Features centroids(static_cast<Eigen::Index>(keep.size()), real.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) centroids.row(static_cast<Eigen::Index>(i)) = km.centroids.row(keep[i]);
  res.bins = centroids.rows();

  std::vector<double> nr(static_cast<std::size_t>(res.bins), 0.0), ng(nr.size(), 0.0);
  for (Eigen::Index i = 0; i < real.rows(); ++i) nr[static_cast<std::size_t>(nearest_centroid(centroids, real, i))] += 1;
  for (Eigen::Index i = 0; i < generated.rows(); ++i) {
    ng[static_cast<std::size_t>(nearest_centroid(centroids, generated, i))] += 1;
  }
  const double n1 = static_cast<double>(real.rows()), n2 = static_cast<double>(generated.rows());
  const double crit = normal_critical_value(alpha);
  for (std::size_t b = 0; b < nr.size(); ++b) {
    const double p1 = nr[b] / n1, p2 = ng[b] / n2;
    const double p = (nr[b] + ng[b]) / (n1 + n2);
    const double se = std::sqrt(p * (1.0 - p) * (1.0 / n1 + 1.0 / n2));
    const double z = se > 0.0 ? (p1 - p2) / se : 0.0;
    const bool sig = std::abs(z) > crit;
    res.real_proportion.push_back(p1);
    res.gen_proportion.push_back(p2);
    res.z.push_back(z);
    res.significant.push_back(sig);
    res.count += sig ? 1 : 0;
  }
  return res;
}

}  // namespace seedselect::eval
