#include "jsdm/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "jsdm/errors.hpp"

namespace jsdm {
namespace {

void require_species(const ModelParams& params, Index j) {
  if (j < 0 || j >= params.S()) throw StructuralError("species index out of range");
}

void require_covariates(const ModelParams& params, const VectorXd& x) {
  if (x.size() != params.p()) throw StructuralError("covariate vector length does not match B");
}

}  // namespace

VectorXd CovariateScaling::design_row(const VectorXd& raw) const {
  if (raw.size() != mean.size()) throw StructuralError("raw covariate length does not match scaling");
  VectorXd row(raw.size() + 1);
  row(0) = 1.0;
  row.tail(raw.size()) = (raw - mean).cwiseQuotient(sd);
  return row;
}

void PresenceData::validate() const {
  const Index n_sites = Y.rows();
  if (X.rows() != n_sites || coords.rows() != n_sites) throw StructuralError("Y, X and coords disagree on site count");
  if (static_cast<Index>(species_names.size()) != Y.cols()) throw StructuralError("species name count mismatch");
  if (static_cast<Index>(site_ids.size()) != n_sites) throw StructuralError("site id count mismatch");
  if (X.cols() < 1) throw StructuralError("design matrix needs an intercept column");
  if ((Y.array() > 1).any()) throw DomainError("presence matrix entries must be 0 or 1");
  if (!X.allFinite() || !coords.allFinite()) throw DomainError("covariates and coordinates must be finite");
  std::vector<std::pair<double, double>> pts(n_sites);
  for (Index i = 0; i < n_sites; ++i) pts[i] = {coords(i, 0), coords(i, 1)};
  std::sort(pts.begin(), pts.end());
  if (std::adjacent_find(pts.begin(), pts.end()) != pts.end()) throw DomainError("duplicated site coordinates");
}

bool ModelParams::satisfies_loading_constraint() const {
  const Index top = std::min(S(), r());
  for (Index j = 0; j < top; ++j) {
    if (!(Lambda(j, j) > 0.0)) return false;
    for (Index h = j + 1; h < r(); ++h) {
      if (Lambda(j, h) != 0.0) return false;
    }
  }
  return true;
}

void ModelParams::validate() const {
  if (Lambda.rows() != B.rows()) throw StructuralError("B and Lambda disagree on species count");
  if (W.size() > 0 && W.cols() != Lambda.cols()) throw StructuralError("W and Lambda disagree on factor count");
  if (!(sigma2_eps > 0.0)) throw DomainError("sigma2_eps must be positive");
  if (!(phi > 0.0)) throw DomainError("phi must be positive");
  if (!B.allFinite() || !Lambda.allFinite() || !W.allFinite()) throw DomainError("parameters must be finite");
  if (!satisfies_loading_constraint()) throw DomainError("Lambda violates the lower-triangular positive-diagonal constraint");
}

MatrixXd linear_predictor(const ModelParams& params, const MatrixXd& X) {
  if (X.cols() != params.p()) throw StructuralError("X columns do not match B");
  MatrixXd eta = X * params.B.transpose();
  if (params.r() > 0 && params.W.size() > 0) {
    if (params.W.rows() != X.rows()) throw StructuralError("W rows do not match X rows");
    eta.noalias() += params.W * params.Lambda.transpose();
  }
  return eta;
}

SpeciesCovariance assemble_sigma_star(const MatrixXd& Lambda, double sigma2_eps) {
  if (!(sigma2_eps > 0.0)) throw DomainError("sigma2_eps must be positive");
  SpeciesCovariance out;
  out.sigma_star = Lambda * Lambda.transpose();
  out.sigma_star.diagonal().array() += sigma2_eps;
  const VectorXd inv_sd = out.sigma_star.diagonal().cwiseSqrt().cwiseInverse();
  out.H = inv_sd.asDiagonal() * out.sigma_star * inv_sd.asDiagonal();
  out.H.diagonal().setOnes();
  return out;
}

BvnParams pair_latent_params(const ModelParams& params, const VectorXd& x, const VectorXd& w, Index j, Index jp,
                             LatentMode mode) {
  require_species(params, j);
  require_species(params, jp);
  require_covariates(params, x);
  switch (mode) {
    case LatentMode::conditional: {
      if (w.size() != params.r()) throw StructuralError("factor vector length does not match Lambda");
      const double sd = std::sqrt(params.sigma2_eps);
      return {(params.B.row(j).dot(x) + params.Lambda.row(j).dot(w)) / sd,
              (params.B.row(jp).dot(x) + params.Lambda.row(jp).dot(w)) / sd, 0.0};
    }
    case LatentMode::marginal:
      return pair_latent_params(params, x, FactorMoments::prior(params.r()), j, jp);
  }
  throw StructuralError("unknown latent mode");
}

BvnParams pair_latent_params(const ModelParams& params, const VectorXd& x, const FactorMoments& w, Index j, Index jp) {
  require_species(params, j);
  require_species(params, jp);
  require_covariates(params, x);
  if (w.mean.size() != params.r()) throw StructuralError("factor mean length does not match Lambda");
  if (!(w.variance >= 0.0)) throw DomainError("factor variance must be non-negative");
  const auto lj = params.Lambda.row(j);
  const auto ljp = params.Lambda.row(jp);
  const double sd1 = std::sqrt(w.variance * lj.squaredNorm() + params.sigma2_eps);
  const double sd2 = std::sqrt(w.variance * ljp.squaredNorm() + params.sigma2_eps);
  double rho = j == jp ? 1.0 : w.variance * lj.dot(ljp) / (sd1 * sd2);
  rho = std::clamp(rho, -1.0, 1.0);
  return {(params.B.row(j).dot(x) + lj.dot(w.mean)) / sd1, (params.B.row(jp).dot(x) + ljp.dot(w.mean)) / sd2, rho};
}

LatentMarginal latent_marginal(const ModelParams& params, const VectorXd& x, const FactorMoments& w) {
  require_covariates(params, x);
  if (w.mean.size() != params.r()) throw StructuralError("factor mean length does not match Lambda");
  MatrixXd cov = w.variance * params.Lambda * params.Lambda.transpose();
  cov.diagonal().array() += params.sigma2_eps;
  const VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
  LatentMarginal out;
  out.mean = (params.B * x + params.Lambda * w.mean).cwiseProduct(inv_sd);
  out.corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  out.corr.diagonal().setOnes();
  return out;
}

double exp_covariance(double dist, double phi) {
  if (!(dist >= 0.0)) throw DomainError("distance must be non-negative");
  if (!(phi > 0.0)) throw DomainError("decay must be positive");
  return std::exp(-phi * dist);
}

MatrixXd exp_covariance_matrix(const Coords& a, const Coords& b, double phi) {
  if (!(phi > 0.0)) throw DomainError("decay must be positive");
  MatrixXd c(a.rows(), b.rows());
  for (Index k = 0; k < b.rows(); ++k) {
    for (Index i = 0; i < a.rows(); ++i) {
      c(i, k) = std::exp(-phi * (a.row(i) - b.row(k)).norm());
    }
  }
  return c;
}

double max_pairwise_distance(const Coords& coords) {
  double best = 0.0;
  for (Index i = 0; i < coords.rows(); ++i) {
    for (Index k = i + 1; k < coords.rows(); ++k) best = std::max(best, (coords.row(i) - coords.row(k)).norm());
  }
  return best;
}

double default_phi(const Coords& coords) {
  const double dmax = max_pairwise_distance(coords);
  if (!(dmax > 0.0)) throw DomainError("need at least two distinct sites to set a default decay");
  return -std::log(0.05) / (0.5 * dmax);
}

}  // namespace jsdm
