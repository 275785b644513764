#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jsdm/prob_core.hpp"

namespace jsdm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Affine standardization applied to raw covariates: z = (raw - mean) / sd.
struct CovariateScaling {
  std::vector<std::string> names;
  VectorXd mean;
  VectorXd sd;

  /// Raw covariate row (without intercept) to a design row (with leading 1).
  VectorXd design_row(const VectorXd& raw) const;
};

/// Sites x species presence matrix with site coordinates and design matrix.
struct PresenceData {
  BinaryMatrix Y;  // n x S
  MatrixXd X;      // n x p, column 0 is the intercept
  Coords coords;   // n x 2, planar
  std::vector<std::string> species_names;
  std::vector<std::string> site_ids;
  CovariateScaling scaling;  // empty names when X was supplied already standardized

  Index n() const { return Y.rows(); }
  Index S() const { return Y.cols(); }
  Index p() const { return X.cols(); }

  /// Throws StructuralError on shape/label mismatch, DomainError on non-binary Y,
  /// duplicated coordinates or non-finite covariates.
  void validate() const;
};

/// Parameters of Z_i = B x_i + Lambda w_i + eps_i.
struct ModelParams {
  MatrixXd B;       // S x p
  MatrixXd Lambda;  // S x r
  MatrixXd W;       // n x r factor values at the data sites (may have 0 rows)
  double sigma2_eps = 1.0;
  double phi = 1.0;  // exponential decay of the factor GPs

  Index S() const { return B.rows(); }
  Index p() const { return B.cols(); }
  Index r() const { return Lambda.cols(); }

  /// Free parameters of Sigma* = Lambda Lambda^T + sigma2 I: S r + 1.
  Index covariance_parameter_count() const { return S() * r() + 1; }

  /// Shapes, sigma2 > 0, phi > 0, and the identifiability constraint on the
  /// top r x r block of Lambda (zero above the diagonal, positive diagonal).
  void validate() const;
  bool satisfies_loading_constraint() const;
};

struct SpeciesCovariance {
  MatrixXd sigma_star;  // Lambda Lambda^T + sigma2 I
  MatrixXd H;           // correlation
};

/// n x S matrix X B^T + W Lambda^T. W may be empty when r = 0.
MatrixXd linear_predictor(const ModelParams& params, const MatrixXd& X);

SpeciesCovariance assemble_sigma_star(const MatrixXd& Lambda, double sigma2_eps);

enum class LatentMode {
  conditional,  // given w: means (Bx + Lambda w)/sigma_eps, independent residuals
  marginal      // w integrated out under its N(0, I) prior: means Bx / sqrt(Sigma*_jj), rho = H
};

/// Distribution of the factor vector at a location: N(mean, variance * I_r).
/// The prior is {0, 1}; kriging with a common decay keeps the covariance isotropic.
struct FactorMoments {
  VectorXd mean;
  double variance = 1.0;

  static FactorMoments prior(Index r) { return {VectorXd::Zero(r), 1.0}; }
};

/// Standardized means and latent correlation feeding the orthant table of a pair.
/// `w` is used only in conditional mode.
BvnParams pair_latent_params(const ModelParams& params, const VectorXd& x, const VectorXd& w, Index j, Index jp,
                             LatentMode mode);

/// Marginal over w ~ N(m, v I): Z ~ N(Bx + Lambda m, v Lambda Lambda^T + sigma2 I), standardized.
BvnParams pair_latent_params(const ModelParams& params, const VectorXd& x, const FactorMoments& w, Index j, Index jp);

/// All-species version of the above: standardized mean vector and correlation matrix.
struct LatentMarginal {
  VectorXd mean;  // S
  MatrixXd corr;  // S x S
};
LatentMarginal latent_marginal(const ModelParams& params, const VectorXd& x, const FactorMoments& w);

/// exp(-phi * dist).
double exp_covariance(double dist, double phi);

/// n x m matrix of exp(-phi |a_i - b_k|).
MatrixXd exp_covariance_matrix(const Coords& a, const Coords& b, double phi);

double max_pairwise_distance(const Coords& coords);

/// Decay at which correlation falls to 0.05 at half the maximum inter-site distance.
double default_phi(const Coords& coords);

}  // namespace jsdm
