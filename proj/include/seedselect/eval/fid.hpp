#pragma once

#include "seedselect/eval/features.hpp"

namespace seedselect::eval {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased covariance; needs >= 2 finite rows.
GaussianStats gaussian_stats(const Features& x);

/// Symmetric PSD square root via eigendecomposition; eigenvalues below 0
/// are clamped to 0 (with a warning when below -1e-8).
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m);

/// Frechet distance between two Gaussians:
/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2), floored at 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

double fid(const Features& real, const Features& generated);

}  // namespace seedselect::eval
