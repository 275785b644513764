#include "jsdm/gp.hpp"

#include <algorithm>
#include <cmath>

#include "jsdm/errors.hpp"

namespace jsdm {

JitteredCholesky cholesky_with_jitter(const MatrixXd& cov) {
  const double scale = cov.rows() > 0 ? cov.diagonal().mean() : 1.0;
  JitteredCholesky out;
  out.llt.compute(cov);
  if (out.llt.info() == Eigen::Success) return out;
  for (double rel = 1e-10; rel <= 1e-6 * 1.0001; rel *= 10.0) {
    MatrixXd jittered = cov;
    jittered.diagonal().array() += rel * scale;
    out.llt.compute(jittered);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = rel * scale;
      return out;
    }
  }
  throw NumericalError("covariance matrix is not positive definite even after jitter");
}

GpSpectrum GpSpectrum::build(const Coords& coords, double phi) {
  MatrixXd cov = exp_covariance_matrix(coords, coords, phi);
  GpSpectrum s;
  s.phi = phi;
  s.jitter = cholesky_with_jitter(cov).jitter;
  cov.diagonal().array() += s.jitter;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of GP covariance failed");
  s.U = eig.eigenvectors();
  s.d = eig.eigenvalues().cwiseMax(1e-14);
  s.log_det = s.d.array().log().sum();
  return s;
}

double GpSpectrum::log_density(const VectorXd& w) const {
  const VectorXd proj = U.transpose() * w;
  return -0.5 * (log_det + (proj.array().square() / d.array()).sum());
}

FactorKriger::FactorKriger(const Coords& sites, double phi)
    : sites_(sites), phi_(phi), chol_(cholesky_with_jitter(exp_covariance_matrix(sites, sites, phi))) {}

MatrixXd FactorKriger::mean(const Coords& targets, const MatrixXd& W) const {
  if (W.rows() != sites_.rows()) throw StructuralError("factor values do not match kriging sites");
  const MatrixXd cross = exp_covariance_matrix(sites_, targets, phi_);  // n x m
  return cross.transpose() * chol_.llt.solve(W);
}

VectorXd FactorKriger::variance(const Coords& targets) const {
  const MatrixXd cross = exp_covariance_matrix(sites_, targets, phi_);
  const MatrixXd half = chol_.llt.matrixL().solve(cross);
  VectorXd v = (1.0 - half.colwise().squaredNorm().array()).matrix().transpose();
  return v.cwiseMax(0.0);
}

}  // namespace jsdm
