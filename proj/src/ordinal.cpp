#include "jsdm/ordinal.hpp"

#include <algorithm>
#include <cmath>

#include "jsdm/errors.hpp"
#include "jsdm/prob_core.hpp"

namespace jsdm {
namespace {

void require_split(const OrdinalTable& t, int k, int kp) {
  t.validate();
  if (k < 1 || k > t.K() - 1 || kp < 1 || kp > t.K() - 1) throw StructuralError("split index must lie in 1..K-1");
}

void require_increasing(const std::vector<double>& cut) {
  for (std::size_t i = 0; i < cut.size(); ++i) {
    if (!std::isfinite(cut[i])) throw DomainError("cutpoints must be finite");
    if (i > 0 && !(cut[i] > cut[i - 1])) throw DomainError("cutpoints must be strictly increasing");
  }
}

}  // namespace

void OrdinalTable::validate() const {
  if (cells.rows() != cells.cols()) throw StructuralError("ordinal table must be square");
  if (cells.rows() < 2) throw StructuralError("ordinal table needs K >= 2");
  if (!cells.allFinite() || (cells.array() < 0.0).any()) throw DomainError("ordinal cells must be finite and non-negative");
  if (std::abs(cells.sum() - 1.0) > 1e-10) throw DomainError("ordinal cells must sum to 1");
}

OddsRatio local_odds(const OrdinalTable& t, int k, int kp) {
  require_split(t, k, kp);
  const auto& c = t.cells;
  return odds_ratio(PairTable{c(k - 1, kp - 1), c(k - 1, kp), c(k, kp - 1), c(k, kp)});
}

OddsRatio global_odds(const OrdinalTable& t, int k, int kp) {
  require_split(t, k, kp);
  const auto& c = t.cells;
  const int K = t.K();
  return odds_ratio(PairTable{c.topLeftCorner(k, kp).sum(), c.topRightCorner(k, K - kp).sum(),
                              c.bottomLeftCorner(K - k, kp).sum(), c.bottomRightCorner(K - k, K - kp).sum()});
}

OddsRatio cumulative_odds(const OrdinalTable& t, int k, int kp) {
  require_split(t, k, kp);
  const auto& c = t.cells;
  const int K = t.K();
  const auto row = c.row(k - 1), next = c.row(k);
  if (!(row.sum() > 0.0) || !(next.sum() > 0.0)) throw DomainError("cumulative odds conditions on an empty row");
  // Row normalizers cancel in the ratio of conditional odds.
  return odds_ratio(PairTable{row.head(kp).sum(), row.tail(K - kp).sum(), next.head(kp).sum(), next.tail(K - kp).sum()});
}

OrdinalTable ordinal_table_from_gaussian(double mu1, double mu2, double rho, const std::vector<double>& cut1,
                                         const std::vector<double>& cut2) {
  BvnParams{mu1, mu2, rho}.validate();
  if (cut1.empty() || cut1.size() != cut2.size()) throw StructuralError("cutpoint sequences must share K-1 >= 1 entries");
  require_increasing(cut1);
  require_increasing(cut2);
  const int K = static_cast<int>(cut1.size()) + 1;
  auto bound = [](const std::vector<double>& cut, int i, double mu) {
    if (i == 0) return -kInf;
    if (i == static_cast<int>(cut.size()) + 1) return kInf;
    return cut[i - 1] - mu;
  };
  // F(a, b) at every pair of (shifted) boundaries, then second differences.
  Eigen::MatrixXd F(K + 1, K + 1);
  for (int a = 0; a <= K; ++a) {
    for (int b = 0; b <= K; ++b) F(a, b) = bvn_cdf(bound(cut1, a, mu1), bound(cut2, b, mu2), rho);
  }
  OrdinalTable t;
  t.cells.resize(K, K);
  for (int a = 0; a < K; ++a) {
    for (int b = 0; b < K; ++b) t.cells(a, b) = std::max(0.0, F(a + 1, b + 1) - F(a, b + 1) - F(a + 1, b) + F(a, b));
  }
  return t;
}

}  // namespace jsdm
