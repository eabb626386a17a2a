#pragma once

#include <Eigen/Dense>

#include "seedselect/autodiff/tensor.hpp"

namespace seedselect::eval {

/// One sample per row.
using Features = Eigen::MatrixXd;

/// [N, D] tensor -> N x D feature matrix.
template <typename S>
Features to_features(const ad::Tensor<S>& t) {
  if (t.rank() != 2) throw ShapeError("features must be [N, D], got " + shape_string(t.shape()));
  return t.matrix(t.dim(0), t.dim(1)).template cast<double>();
}

/// Squared euclidean distance summed coordinate by coordinate in index order,
/// so d(a, b) and d(b, a) are bit-identical.
inline double squared_distance(const Features& a, Eigen::Index i, const Features& b, Eigen::Index j) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    acc += d * d;
  }
  return acc;
}

/// All pairwise squared distances, rows of a against rows of b.
Eigen::MatrixXd pairwise_squared_distances(const Features& a, const Features& b);

}  // namespace seedselect::eval
