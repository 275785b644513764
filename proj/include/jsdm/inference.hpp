#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "jsdm/grid.hpp"
#include "jsdm/sampler.hpp"
#include "jsdm/tables.hpp"

namespace jsdm {

/// How a draw's 2x2 table is obtained.
///  analytic    - orthant probabilities of the marginal-mode latent pair
///  monte_carlo - frequencies of simulated latent pairs from the same bivariate normal
///  conditional - product of univariate Phi given the factor values: stored w at a data
///                site, an average over pointwise kriging draws of w at a new location
enum class PairMethod { analytic, monte_carlo, conditional };

PairMethod parse_pair_method(std::string_view name);  // "analytic", "mc", "conditional"
std::string_view to_string(PairMethod m);

/// Either a data site of the fit or a new location with its own design row.
struct Location {
  std::optional<Index> site;
  VectorXd design;
  Eigen::Vector2d coords = Eigen::Vector2d::Zero();

  static Location data_site(Index i) { return {i, {}, {}}; }
  static Location point(VectorXd design_row, Eigen::Vector2d xy) { return {std::nullopt, std::move(design_row), xy}; }
};

struct PairTableOptions {
  std::uint64_t mc_draws = 100000;  // latent pairs per posterior draw (monte_carlo)
  Index kriged_samples = 64;        // w samples averaged per draw (conditional, new location)
  std::uint64_t seed = 1;
};

/// One table per posterior draw.
std::vector<PairTable> pair_table_draws(const PosteriorDraws& draws, const Location& where, Index j, Index jp,
                                        PairMethod method, const PairTableOptions& options = {});

struct SurfaceOptions {
  PairMethod method = PairMethod::analytic;
  PairTableOptions pair;
  bool keep_draws = false;
  bool parallel = true;  // analytic route only; false runs the serial reference kernel
};

/// Per-node summaries of log10 theta (mean, 5%/95% quantiles), P(theta > 1), mean p11 and p00.
/// Draws whose table is 0/0 (sparse Monte Carlo frequencies) are left out of the theta summaries.
SurfaceGrid odds_surface(const PosteriorDraws& draws, const PredictionGrid& grid, Index j, Index jp,
                         const SurfaceOptions& options = {});

/// Factor fields at new locations for one posterior draw.
struct KrigedFactors {
  MatrixXd mean;      // m x r
  VectorXd variance;  // m, common to all factors
  MatrixXd sample;    // m x r pointwise predictive draw
};

/// Simple kriging of each draw's W under its decay. Nonspatial draws return the N(0, I) prior.
std::vector<KrigedFactors> krige_factors(const PosteriorDraws& draws, const Coords& new_locations,
                                         std::uint64_t seed = 1);

struct RichnessSummary {
  double mean = 0.0;
  double variance = 0.0;
  double independence_variance = 0.0;  // covariance terms dropped
};

/// Posterior predictive moments of species richness at a location (marginal mode):
/// mean of sum_j p_j; variance = mean over draws of [sum p_j(1-p_j) + 2 sum_{j<j'} (p11 - p_j p_j')]
/// plus the between-draw variance of sum_j p_j.
RichnessSummary richness_stats(const PosteriorDraws& draws, const VectorXd& design_row);
RichnessSummary richness_stats(const PosteriorDraws& draws, Index site);

/// Per-draw homogeneity odds ratio gamma = [p_j/(1-p_j)] / [p_j'/(1-p_j')] from marginal presence
/// probabilities; log gamma is exact even when p is within rounding of 0 or 1.
std::vector<OddsRatio> homogeneity_odds(const PosteriorDraws& draws, const VectorXd& design_row, Index j, Index jp);
std::vector<OddsRatio> homogeneity_odds(const PosteriorDraws& draws, Index site, Index j, Index jp);

/// Type-7 sample quantile; tolerates infinities.
double sample_quantile(std::vector<double> values, double q);

}  // namespace jsdm
