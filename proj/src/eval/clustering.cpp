#include "seedselect/eval/clustering.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "seedselect/core/rng.hpp"

namespace seedselect::eval {

Eigen::Index nearest_centroid(const Features& centroids, const Features& x, Eigen::Index row) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, row, centroids, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace {

KMeansResult kmeans_once(const Features& x, Eigen::Index k, Rng& rng, int max_iters) {
  const Eigen::Index n = x.rows();
  KMeansResult res;
  res.centroids.resize(k, x.cols());
  // k-means++ seeding.
  res.centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd dmin(n);
  for (Eigen::Index i = 0; i < n; ++i) dmin(i) = squared_distance(x, i, res.centroids, 0);
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = dmin.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= dmin(i);
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    res.centroids.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) dmin(i) = std::min(dmin(i), squared_distance(x, i, res.centroids, c));
  }
  res.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index a = nearest_centroid(res.centroids, x, i);
      if (a != res.assignment[static_cast<std::size_t>(i)]) {
        res.assignment[static_cast<std::size_t>(i)] = a;
        changed = true;
      }
    }
    if (!changed) break;
    Features sums = Features::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignment[static_cast<std::size_t>(i)]) += x.row(i);
      counts(res.assignment[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts(c) > 0) res.centroids.row(c) = sums.row(c) / counts(c);
    }
  }
  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    res.inertia += squared_distance(x, i, res.centroids, res.assignment[static_cast<std::size_t>(i)]);
  }
  return res;
}

}  // namespace

KMeansResult kmeans(const Features& x, Eigen::Index k, std::uint64_t seed, int max_iters, int restarts) {
  if (k < 1) throw std::invalid_argument("k-means needs k >= 1");
  if (x.rows() < k) {
    throw std::invalid_argument("k-means with k = " + std::to_string(k) + " needs at least as many points, got " +
                                std::to_string(x.rows()));
  }
  Rng rng(seed);
  KMeansResult best;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto res = kmeans_once(x, k, rng, max_iters);
    if (r == 0 || res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

std::vector<double> inertia_curve(const Features& x, Eigen::Index k_max, std::uint64_t seed, int restarts) {
  std::vector<double> curve;
  for (Eigen::Index k = 1; k <= k_max; ++k) {
    const double inertia = kmeans(x, k, Rng::mix(seed, static_cast<std::uint64_t>(k)), 100, restarts).inertia;
    curve.push_back(curve.empty() ? inertia : std::min(curve.back(), inertia));
  }
  return curve;
}

Eigen::Index elbow(const std::vector<double>& curve) {
  if (curve.size() < 3) throw std::invalid_argument("elbow needs a curve over at least k = 1..3");
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i] > curve[i - 1]) {
      throw std::invalid_argument("curve increases between k = " + std::to_string(i) + " and k = " +
                                  std::to_string(i + 1));
    }
  }
  const double scale = std::max(std::abs(curve.front()), 1e-300);
  Eigen::Index best_k = 2;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double d2 = curve[i - 1] - 2.0 * curve[i] + curve[i + 1];
    if (d2 > best + 1e-12 * scale) {
      best = d2;
      best_k = static_cast<Eigen::Index>(i + 1);
    }
  }
  return best_k;
}

}  // namespace seedselect::eval
