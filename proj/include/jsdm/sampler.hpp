#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "jsdm/gp.hpp"
#include "jsdm/model.hpp"
#include "jsdm/rng.hpp"

namespace jsdm {

struct ChainConfig {
  long iterations = 10000;
  long burn_in = 5000;
  long thin = 1;
  Index r = 3;
  bool spatial = true;
  /// Fixed decay; <= 0 selects default_phi(coords) at init.
  double phi = 0.0;
  /// Non-empty: phi gets a discrete-uniform prior on these values (at most 10) and a Gibbs update.
  std::vector<double> phi_grid;
  double prior_var_B = 100.0;
  double prior_var_Lambda = 1.0;
  std::uint64_t seed = 1;

  /// Throws DomainError for burn_in >= iterations, thin < 1, r < 1, non-positive priors, bad grid.
  void validate() const;

  nlohmann::json to_json() const;
  static ChainConfig from_json(const nlohmann::json& j);
  /// FNV-1a of the canonical JSON dump, 16 hex digits.
  std::string hash() const;
};

/// Gaussian full conditional N(mean, cov) of a parameter block.
struct GaussianConditional {
  VectorXd mean;
  MatrixXd cov;
};

struct ChainState {
  MatrixXd Z;  // n x S latent
  ModelParams params;
  long iteration = 0;
  Rng rng;
  std::normal_distribution<double> normal;
  std::vector<std::string> warnings;
};

/// Data plus everything precomputed once per chain: design factorization and GP spectra.
class SamplerContext {
 public:
  SamplerContext(const PresenceData& data, ChainConfig config);

  const PresenceData& data() const { return *data_; }
  const ChainConfig& config() const { return config_; }
  const GpSpectrum& spectrum(double phi) const;
  const std::vector<GpSpectrum>& spectra() const { return spectra_; }
  /// Cholesky of X^T X / sigma2 + I / prior_var_B.
  const Eigen::LLT<MatrixXd>& b_precision() const { return b_precision_; }
  double design_condition_number() const { return design_cond_; }

 private:
  const PresenceData* data_;
  ChainConfig config_;
  std::vector<GpSpectrum> spectra_;
  Eigen::LLT<MatrixXd> b_precision_;
  double design_cond_ = 1.0;
};

/// Intercepts from Phi^{-1}(prevalence) (clamped to [1/(2n), 1 - 1/(2n)] with a warning),
/// other coefficients 0, small constrained loadings, W = 0, Z drawn in its truncation region.
ChainState init_chain(const SamplerContext& ctx);

/// Full conditionals, exposed for verification.
GaussianConditional conditional_B(const ChainState& state, const SamplerContext& ctx, Index species);
/// Joint conditional of the free entries of row `species` (the first min(species+1, r) columns)
/// before the positivity truncation on the diagonal entry.
GaussianConditional conditional_Lambda(const ChainState& state, const SamplerContext& ctx, Index species);
/// Nonspatial: conditional of w_i (length r).
GaussianConditional conditional_W_site(const ChainState& state, const SamplerContext& ctx, Index site);
/// Spatial: joint conditional of factor column h across all n sites.
GaussianConditional conditional_W_factor(const ChainState& state, const SamplerContext& ctx, Index factor);

void update_Z(ChainState& state, const SamplerContext& ctx);
void update_B(ChainState& state, const SamplerContext& ctx);
void update_Lambda(ChainState& state, const SamplerContext& ctx);
void update_W(ChainState& state, const SamplerContext& ctx);
/// Metropolis move per constrained factor h: negate column h of W and of Lambda except the
/// diagonal entry. Other species' means are unchanged, so only species h enters the ratio.
/// Lets a chain leave the mode where Lambda_hh is pinned near 0 with the factor reversed.
void update_orientation(ChainState& state, const SamplerContext& ctx);
/// No-op unless the config carries a phi grid.
void update_phi(ChainState& state, const SamplerContext& ctx);
/// Z -> B -> Lambda -> W -> orientation -> phi, then iteration += 1.
void sweep(ChainState& state, const SamplerContext& ctx);

/// Unnormalized log posterior with Z integrated out: probit likelihood plus priors on B, Lambda, W.
double log_posterior(const ChainState& state, const SamplerContext& ctx);

/// Stored post-burn-in draws plus what downstream functionals need from the data.
struct PosteriorDraws {
  std::vector<MatrixXd> B;
  std::vector<MatrixXd> Lambda;
  std::vector<MatrixXd> W;
  std::vector<MatrixXd> H;
  std::vector<double> phi;
  std::vector<double> log_posterior;  // every iteration, burn-in included
  ChainConfig config;
  MatrixXd X;
  Coords coords;
  std::vector<std::string> species_names;
  std::vector<std::string> site_ids;
  CovariateScaling scaling;
  std::vector<std::string> warnings;

  Index size() const { return static_cast<Index>(B.size()); }
  Index S() const { return species_names.empty() ? (B.empty() ? 0 : B.front().rows()) : static_cast<Index>(species_names.size()); }
  /// Draw d as ModelParams (sigma2_eps = 1).
  ModelParams params(Index d) const;
  void validate() const;
};

struct RunOptions {
  /// Written (JSON checkpoint) when a sweep throws. Empty: no checkpoint.
  std::string checkpoint_on_failure;
};

PosteriorDraws run(const PresenceData& data, const ChainConfig& config, const RunOptions& options = {});

/// Continue a chain from a checkpoint until config.iterations. Draws stored before the
/// checkpoint are not recovered; only the remaining ones are returned.
PosteriorDraws resume(const PresenceData& data, const nlohmann::json& checkpoint, const RunOptions& options = {});

nlohmann::json checkpoint_json(const ChainState& state, const ChainConfig& config);
ChainState restore_state(const nlohmann::json& checkpoint, const ChainConfig& config);

}  // namespace jsdm
