#include "jsdm/tables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "jsdm/errors.hpp"

namespace jsdm {

void PairTable::validate() const {
  for (double c : {p00, p01, p10, p11}) {
    if (!std::isfinite(c) || c < 0.0) throw DomainError("table cells must be finite and non-negative");
  }
  if (!(total() > 0.0)) throw DomainError("table total must be positive");
}

double OddsRatio::value() const {
  switch (tag_) {
    case Tag::zero: return 0.0;
    case Tag::infinite: return std::numeric_limits<double>::infinity();
    case Tag::finite: break;
  }
  return std::exp(ln_);
}

double OddsRatio::log() const {
  switch (tag_) {
    case Tag::zero: return -std::numeric_limits<double>::infinity();
    case Tag::infinite: return std::numeric_limits<double>::infinity();
    case Tag::finite: break;
  }
  return ln_;
}

double OddsRatio::log10() const { return log() / std::numbers::ln10; }

std::string_view OddsRatio::tag_name() const {
  switch (tag_) {
    case Tag::zero: return "zero";
    case Tag::infinite: return "infinite";
    case Tag::finite: break;
  }
  return "finite";
}

namespace {

/// log(a / b) without the cancellation of log(a) - log(b) for comparable tiny cells.
double log_ratio(double a, double b) {
  const double r = a / b;
  return std::isnormal(r) ? std::log(r) : std::log(a) - std::log(b);
}

}  // namespace

OddsRatio odds_ratio(const PairTable& t) {
  t.validate();
  const bool num_zero = t.p00 == 0.0 || t.p11 == 0.0;
  const bool den_zero = t.p01 == 0.0 || t.p10 == 0.0;
  if (num_zero && den_zero) throw DomainError("odds ratio is 0/0 for this table");
  if (den_zero) return OddsRatio::infinite();
  if (num_zero) return OddsRatio::zero();
  return OddsRatio::from_log(log_ratio(t.p00, t.p01) + log_ratio(t.p11, t.p10));
}

double log10_odds_ratio(const PairTable& t) {
  const OddsRatio theta = odds_ratio(t);
  if (!theta.is_finite()) throw DomainError("log odds ratio is unbounded for this table");
  return theta.log10();
}

Dependence classify_dependence(const PairTable& t, double tol) {
  if (!(tol >= 0.0)) throw DomainError("classification tolerance must be non-negative");
  const PairTable n = renormalize(t);
  const double expected = n.row1() * n.col1();
  if (n.p11 > expected * (1.0 + tol)) return Dependence::sympatric;
  if (n.p11 < expected * (1.0 - tol)) return Dependence::allopatric;
  return Dependence::independent;
}

std::string_view to_string(Dependence d) {
  switch (d) {
    case Dependence::sympatric: return "sympatric";
    case Dependence::allopatric: return "allopatric";
    case Dependence::independent: break;
  }
  return "independent";
}

PairTable renormalize(const PairTable& t) {
  t.validate();
  // Rescale by the largest cell first so totals of denormal-scale tables stay exact.
  const double m = std::max(std::max(t.p00, t.p01), std::max(t.p10, t.p11));
  const PairTable s = t.scaled(1.0 / m);
  return s.scaled(1.0 / s.total());
}

}  // namespace jsdm
