#pragma once

#include <limits>

#include "jsdm/rng.hpp"
#include "jsdm/tables.hpp"

namespace jsdm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Latent bivariate normal for a species pair: means (mu1, mu2), unit variances, correlation rho.
struct BvnParams {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double rho = 0.0;

  /// Throws DomainError unless the means are finite and |rho| <= 1.
  void validate() const;
};

/// Phi(x). Throws DomainError on NaN or infinite input.
double std_normal_cdf(double x);

/// log Phi(x), accurate far into the lower tail where Phi itself underflows.
double log_std_normal_cdf(double x);

/// Phi^{-1}(p) for p in (0, 1).
double std_normal_quantile(double p);

/// P(Z1 <= h, Z2 <= k) for a standard bivariate normal with correlation rho.
/// h and k may be +-infinity. Genz's BVND: Gauss-Legendre quadrature of the
/// Drezner-Wesolowsky correlation integral with 6/12/20 nodes by |rho|, and the
/// asymptotic substitution for |rho| >= 0.925. rho = +-1 uses the degenerate closed forms.
double bvn_cdf(double h, double k, double rho);

/// log P(Z1 <= h, Z2 <= k). Falls back to a log-space integral over the first
/// coordinate when the probability is below ~1e-300.
double log_bvn_cdf(double h, double k, double rho);

/// Phi2(h, k, rho) - Phi(h) Phi(k), computed directly from the correlation integral
/// so its sign is exactly the sign of rho (zero only at rho = 0 or on underflow).
double bvn_dependence(double h, double k, double rho);

/// Four orthant probabilities of the latent pair thresholded at 0 (presence when Z >= 0).
PairTable cell_probs(const BvnParams& params);

/// Natural logs of the four orthant probabilities; finite even when cells underflow.
struct LogPairTable {
  double l00, l01, l10, l11;
};
LogPairTable log_cell_probs(const BvnParams& params);

/// Natural-log odds ratio of the orthant table. Sign agrees with sign(rho) and
/// the value stays finite for extreme means.
double log_odds_from_bvn(const BvnParams& params);

/// Draw from N(mean, sd^2) truncated to (lower, upper). Inverse CDF for central
/// intervals, exponential/uniform-proposal rejection past 3.5 sd.
double sample_truncated_normal(double mean, double sd, double lower, double upper, Rng& rng);

}  // namespace jsdm
