#include "seedselect/eval/prdc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace seedselect::eval {

namespace {

/// Sorted squared distances from each row to the other rows.
std::vector<std::vector<double>> sorted_neighbours(const Features& x) {
  const Eigen::MatrixXd d = pairwise_squared_distances(x, x);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto& row = out[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      if (j != i) row.push_back(d(i, j));
    }
    std::sort(row.begin(), row.end());
  }
  return out;
}

}  // namespace

Eigen::VectorXd knn_radii_squared(const Features& x, Eigen::Index k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (x.rows() < k + 1) {
    throw std::invalid_argument("need at least k + 1 = " + std::to_string(k + 1) + " points, got " +
                                std::to_string(x.rows()));
  }
  const auto nb = sorted_neighbours(x);
  Eigen::VectorXd r(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = nb[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)];
  return r;
}

PrdcResult prdc(const Features& real, const Features& generated, Eigen::Index k) {
  const Eigen::VectorXd r_real = knn_radii_squared(real, k);
  const Eigen::VectorXd r_gen = knn_radii_squared(generated, k);
  const Eigen::MatrixXd d = pairwise_squared_distances(real, generated);  // [real, gen]
  const auto n = real.rows(), m = generated.rows();

  Eigen::Index precise = 0, recalled = 0, covered = 0;
  double density_hits = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index inside = 0;
    for (Eigen::Index i = 0; i < n; ++i) inside += d(i, j) < r_real(i);
    precise += inside > 0;
    density_hits += static_cast<double>(inside);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    bool in_gen = false;
    double nearest = d(i, 0);
    for (Eigen::Index j = 0; j < m; ++j) {
      in_gen = in_gen || d(i, j) < r_gen(j);
      nearest = std::min(nearest, d(i, j));
    }
    recalled += in_gen;
    covered += nearest < r_real(i);
  }
  PrdcResult res;
  res.k = k;
  res.precision = static_cast<double>(precise) / static_cast<double>(m);
  res.recall = static_cast<double>(recalled) / static_cast<double>(n);
  res.density = density_hits / (static_cast<double>(k) * static_cast<double>(m));
  res.coverage = static_cast<double>(covered) / static_cast<double>(n);
  return res;
}

std::vector<double> knn_radius_curve(const Features& x, Eigen::Index k_max) {
  if (x.rows() < k_max + 1) throw std::invalid_argument("k-NN curve needs more points than k_max");
  const auto nb = sorted_neighbours(x);
  std::vector<double> curve;
  for (Eigen::Index k = 1; k <= k_max; ++k) {
    double acc = 0.0;
    for (const auto& row : nb) acc += std::sqrt(row[static_cast<std::size_t>(k - 1)]);
    curve.push_back(acc / static_cast<double>(nb.size()));
  }
  return curve;
}

}  // namespace seedselect::eval
