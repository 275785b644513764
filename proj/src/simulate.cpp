#include "jsdm/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "jsdm/errors.hpp"
#include "jsdm/gp.hpp"
#include "jsdm/prob_core.hpp"

namespace jsdm {

PresenceData simulate_community(const ModelParams& params, const Coords& coords, const MatrixXd& X, Rng& rng,
                                FactorField field, SimulationTrace* trace) {
  if (X.rows() != coords.rows()) throw StructuralError("X and coords disagree on site count");
  if (X.cols() != params.p()) throw StructuralError("X columns do not match B");
  if (!(params.sigma2_eps > 0.0)) throw DomainError("sigma2_eps must be positive");
  const Index n = X.rows(), S = params.S(), r = params.r();
  std::normal_distribution<double> normal;

  MatrixXd W(n, r);
  for (Index h = 0; h < r; ++h) {
    for (Index i = 0; i < n; ++i) W(i, h) = normal(rng);
  }
  if (field == FactorField::spatial && r > 0) {
    if (!(params.phi > 0.0)) throw DomainError("phi must be positive");
    const JitteredCholesky chol = cholesky_with_jitter(exp_covariance_matrix(coords, coords, params.phi));
    W = chol.llt.matrixL() * W;
  }

  MatrixXd Z = X * params.B.transpose() + W * params.Lambda.transpose();
  const double sd = std::sqrt(params.sigma2_eps);
  for (Index j = 0; j < S; ++j) {
    for (Index i = 0; i < n; ++i) Z(i, j) += sd * normal(rng);
  }

  PresenceData data;
  data.Y = (Z.array() >= 0.0).cast<std::uint8_t>();
  data.X = X;
  data.coords = coords;
  char buf[32];
  for (Index j = 0; j < S; ++j) {
    std::snprintf(buf, sizeof buf, "sp%02ld", static_cast<long>(j + 1));
    data.species_names.emplace_back(buf);
  }
  for (Index i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "s%04ld", static_cast<long>(i + 1));
    data.site_ids.emplace_back(buf);
  }
  if (trace) {
    trace->W = std::move(W);
    trace->Z = std::move(Z);
  }
  return data;
}

SurfaceGrid true_odds_surface(const ModelParams& params, const PredictionGrid& grid, Index j, Index jp) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const Index nodes = grid.nodes.rows();
  SurfaceGrid s;
  s.nodes = grid.nodes;
  s.mask = grid.mask;
  s.mean_log10_theta = VectorXd::Constant(nodes, nan);
  s.q05 = s.q95 = s.p_exceed = s.p11_mean = s.p00_mean = s.mean_log10_theta;
  const FactorMoments prior = FactorMoments::prior(params.r());
  for (Index k = 0; k < nodes; ++k) {
    if (grid.mask[k]) continue;
    const BvnParams bp = pair_latent_params(params, grid.design.row(k).transpose(), prior, j, jp);
    const double l10 = log_odds_from_bvn(bp) / std::numbers::ln10;
    const PairTable t = cell_probs(bp);
    s.mean_log10_theta(k) = s.q05(k) = s.q95(k) = l10;
    s.p_exceed(k) = l10 > 0.0 ? 1.0 : 0.0;
    s.p11_mean(k) = t.p11;
    s.p00_mean(k) = t.p00;
  }
  return s;
}

SyntheticCovariates::SyntheticCovariates(Index count, double domain, Rng& rng) {
  if (!(domain > 0.0)) throw DomainError("domain size must be positive");
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  amplitude_.resize(count, 3);
  phase_.resize(count, 3);
  freq_x_.resize(count, 3);
  freq_y_.resize(count, 3);
  for (Index c = 0; c < count; ++c) {
    for (Index m = 0; m < 3; ++m) {
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const double wavelength = domain * (0.5 + 1.5 * unit(rng));
      freq_x_(c, m) = 2.0 * std::numbers::pi * std::cos(angle) / wavelength;
      freq_y_(c, m) = 2.0 * std::numbers::pi * std::sin(angle) / wavelength;
      amplitude_(c, m) = 1.0 + 0.5 * normal(rng);
      phase_(c, m) = 2.0 * std::numbers::pi * unit(rng);
    }
  }
}

MatrixXd SyntheticCovariates::evaluate(const Coords& points) const {
  MatrixXd out = MatrixXd::Zero(points.rows(), count());
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index c = 0; c < count(); ++c) {
      for (Index m = 0; m < 3; ++m) {
        out(i, c) += amplitude_(c, m) *
                     std::cos(freq_x_(c, m) * points(i, 0) + freq_y_(c, m) * points(i, 1) + phase_(c, m));
      }
    }
  }
  return out;
}

}  // namespace jsdm
