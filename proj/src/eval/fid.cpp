#include "seedselect/eval/fid.hpp"

#include <cmath>

#include "seedselect/core/error.hpp"
#include "seedselect/core/log.hpp"

namespace seedselect::eval {

Eigen::MatrixXd pairwise_squared_distances(const Features& a, const Features& b) {
  if (a.cols() != b.cols()) throw ShapeError("feature dimensions differ: " + std::to_string(a.cols()) + " vs " +
                                             std::to_string(b.cols()));
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = squared_distance(a, i, b, j);
  }
  return d;
}

GaussianStats gaussian_stats(const Features& x) {
  if (x.rows() < 2) throw std::invalid_argument("Gaussian statistics need at least 2 samples");
  if (!x.allFinite()) throw NumericError("features contain NaN or infinity");
  GaussianStats s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

namespace {

Eigen::VectorXd clamped_eigenvalues(const Eigen::VectorXd& ev, const char* what) {
  Eigen::VectorXd out = ev;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out(i) < -1e-8) log::warn(std::string(what) + " has eigenvalue " + std::to_string(out(i)) + ", clamped to 0");
    if (out(i) < 0.0) out(i) = 0.0;
  }
  return out;
}

}  // namespace

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Eigen::VectorXd ev = clamped_eigenvalues(es.eigenvalues(), "covariance");
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) {
    throw ShapeError("feature dimensions differ: " + std::to_string(a.mean.size()) + " vs " +
                     std::to_string(b.mean.size()));
  }
  if (!a.cov.allFinite() || !b.cov.allFinite() || !a.mean.allFinite() || !b.mean.allFinite()) {
    throw NumericError("Gaussian statistics contain NaN or infinity");
  }
  const Eigen::MatrixXd s1h = sqrtm_psd(a.cov);
  const Eigen::MatrixXd inner = s1h * b.cov * s1h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const double tr_cross = clamped_eigenvalues(es.eigenvalues(), "covariance product").cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_cross;
  return std::max(0.0, d);
}

double fid(const Features& real, const Features& generated) {
  if (real.cols() != generated.cols()) {
    throw ShapeError("feature dimensions differ: " + std::to_string(real.cols()) + " vs " +
                     std::to_string(generated.cols()));
  }
  return frechet_distance(gaussian_stats(real), gaussian_stats(generated));
}

}  // namespace seedselect::eval
