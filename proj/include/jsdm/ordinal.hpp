#pragma once

#include <vector>

#include <Eigen/Dense>

#include "jsdm/tables.hpp"

namespace jsdm {

/// K x K joint distribution of two ordinal classifications; row = species j, column = species j'.
/// Categories are numbered 1..K in the functions below.
struct OrdinalTable {
  Eigen::MatrixXd cells;

  int K() const { return static_cast<int>(cells.rows()); }
  /// Square, K >= 2, non-negative, finite, summing to 1 within 1e-10.
  void validate() const;
};

/// P(k,k')P(k+1,k'+1) / [P(k,k'+1)P(k+1,k')], 1 <= k, k' <= K-1.
OddsRatio local_odds(const OrdinalTable& t, int k, int kp);

/// Odds ratio of the 2x2 table collapsed at Y <= k, Y' <= k'.
OddsRatio global_odds(const OrdinalTable& t, int k, int kp);

/// odds(Y' <= k' | Y = k) / odds(Y' <= k' | Y = k+1). DomainError if row k or k+1 is empty.
OddsRatio cumulative_odds(const OrdinalTable& t, int k, int kp);

/// Rectangle probabilities of a latent bivariate normal (means mu, unit variances, correlation rho)
/// cut at strictly increasing thresholds: category k spans [c_{k-1}, c_k) with c_0 = -inf, c_K = +inf.
/// Both cutpoint sequences need K-1 entries.
OrdinalTable ordinal_table_from_gaussian(double mu1, double mu2, double rho, const std::vector<double>& cut1,
                                         const std::vector<double>& cut2);

}  // namespace jsdm
