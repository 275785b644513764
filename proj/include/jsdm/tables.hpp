#pragma once

#include <string_view>

namespace jsdm {

/// 2x2 presence/absence table. First index: species j absent(0)/present(1); second: species j'.
/// Cells need not sum to 1.
struct PairTable {
  double p00 = 0.0;
  double p01 = 0.0;
  double p10 = 0.0;
  double p11 = 0.0;

  double total() const { return p00 + p01 + p10 + p11; }
  double row1() const { return p10 + p11; }  // p_{1.}
  double col1() const { return p01 + p11; }  // p_{.1}
  PairTable transposed() const { return {p00, p10, p01, p11}; }
  PairTable scaled(double c) const { return {c * p00, c * p01, c * p10, c * p11}; }

  /// Throws DomainError for negative/non-finite cells or a non-positive total.
  void validate() const;
};

/// Odds ratio with explicit tags for the degenerate cases so they survive
/// summaries and serialization without floating-point infinities.
class OddsRatio {
 public:
  enum class Tag { finite, zero, infinite };

  static OddsRatio from_log(double ln_theta) { return OddsRatio(Tag::finite, ln_theta); }
  static OddsRatio zero() { return OddsRatio(Tag::zero, 0.0); }
  static OddsRatio infinite() { return OddsRatio(Tag::infinite, 0.0); }

  Tag tag() const { return tag_; }
  bool is_finite() const { return tag_ == Tag::finite; }
  /// theta; 0 or +inf for the tagged extremes.
  double value() const;
  /// Natural log; -inf / +inf for the tagged extremes.
  double log() const;
  double log10() const;
  /// "finite", "zero" or "infinite".
  std::string_view tag_name() const;

 private:
  OddsRatio(Tag tag, double ln_theta) : tag_(tag), ln_(ln_theta) {}
  Tag tag_;
  double ln_;
};

/// theta = p11 p00 / (p10 p01), evaluated in log space.
/// Zero off-diagonal with non-zero diagonal -> infinite; zero diagonal with non-zero
/// off-diagonal -> zero; 0/0 -> DomainError.
OddsRatio odds_ratio(const PairTable& t);

/// log10 theta. Throws DomainError for the tagged extremes (use odds_ratio for those).
double log10_odds_ratio(const PairTable& t);

enum class Dependence { sympatric, allopatric, independent };

inline constexpr double kDefaultDependenceTol = 1e-6;

/// Compares p11 against p1. p.1 of the renormalized table with relative tolerance `tol`.
Dependence classify_dependence(const PairTable& t, double tol = kDefaultDependenceTol);
std::string_view to_string(Dependence d);

/// Cells divided by their total.
PairTable renormalize(const PairTable& t);

}  // namespace jsdm
