#pragma once

#include "jsdm/grid.hpp"
#include "jsdm/model.hpp"
#include "jsdm/rng.hpp"

namespace jsdm {

enum class FactorField { spatial, independent };

/// Realized latent quantities of a simulated community.
struct SimulationTrace {
  MatrixXd W;  // n x r
  MatrixXd Z;  // n x S
};

/// Clipped Gaussian field: W from r independent exponential-covariance GPs with decay
/// params.phi (or i.i.d. N(0, 1)), eps ~ N(0, sigma2), Z = X B^T + W Lambda^T + eps, Y = 1(Z >= 0).
/// params.W is ignored. Labels are sp01.. and s0001..
PresenceData simulate_community(const ModelParams& params, const Coords& coords, const MatrixXd& X, Rng& rng,
                                FactorField field = FactorField::spatial, SimulationTrace* trace = nullptr);

/// Marginal-mode log10 theta at every grid node for known parameters.
/// q05 = q95 = mean; p_exceed is 1 when theta > 1, else 0.
SurfaceGrid true_odds_surface(const ModelParams& params, const PredictionGrid& grid, Index j, Index jp);

/// Smooth synthetic covariate surfaces: each covariate is a sum of three random plane
/// waves with wavelengths comparable to the domain size.
class SyntheticCovariates {
 public:
  SyntheticCovariates(Index count, double domain, Rng& rng);
  Index count() const { return amplitude_.rows(); }
  /// m x count raw covariate values.
  MatrixXd evaluate(const Coords& points) const;

 private:
  MatrixXd amplitude_, phase_;
  MatrixXd freq_x_, freq_y_;
};

}  // namespace jsdm
