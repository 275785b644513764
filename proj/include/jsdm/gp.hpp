#pragma once

#include <Eigen/Dense>

#include "jsdm/model.hpp"

namespace jsdm {

/// Cholesky of a covariance matrix, retrying with diagonal jitter 1e-10, 1e-9, ... 1e-6
/// (relative to the mean diagonal) before throwing NumericalError.
struct JitteredCholesky {
  Eigen::LLT<MatrixXd> llt;
  double jitter = 0.0;
};
JitteredCholesky cholesky_with_jitter(const MatrixXd& cov);

/// Eigendecomposition C = U diag(d) U^T of the (jittered) exponential covariance at the data sites.
/// Lets the spatial factor update solve (C^{-1} + a I) for any a in O(n^2).
struct GpSpectrum {
  double phi = 0.0;
  MatrixXd U;
  VectorXd d;
  double log_det = 0.0;
  double jitter = 0.0;

  static GpSpectrum build(const Coords& coords, double phi);

  /// -0.5 (log det C + w^T C^{-1} w), constants dropped.
  double log_density(const VectorXd& w) const;
};

/// Simple kriging of unit-variance factor fields from the data sites to new locations.
class FactorKriger {
 public:
  FactorKriger(const Coords& sites, double phi);

  /// Predictive mean (m x r) of W's columns at `targets` given their values at the sites.
  MatrixXd mean(const Coords& targets, const MatrixXd& W) const;
  /// Predictive variance (m), shared across factors.
  VectorXd variance(const Coords& targets) const;

 private:
  Coords sites_;
  double phi_;
  JitteredCholesky chol_;
};

}  // namespace jsdm
