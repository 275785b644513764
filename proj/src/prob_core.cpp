#include "jsdm/prob_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include <boost/math/special_functions/erf.hpp>

#include "jsdm/errors.hpp"

namespace jsdm {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

// Half of the symmetric Gauss-Legendre rules on [-1, 1] (negative abscissae).
constexpr std::array<double, 3> kX6 = {-0.93246951420315205, -0.66120938646626448, -0.23861918608319693};
constexpr std::array<double, 3> kW6 = {0.17132449237916975, 0.36076157304813894, 0.46791393457269137};
constexpr std::array<double, 6> kX12 = {-0.98156063424671924, -0.9041172563704748,  -0.76990267419430469,
                                        -0.58731795428661748, -0.36783149899818018, -0.12523340851146891};
constexpr std::array<double, 6> kW12 = {0.047175336386512022, 0.10693932599531888, 0.16007832854334611,
                                        0.20316742672306565,  0.23349253653835464, 0.24914704581340269};
constexpr std::array<double, 10> kX20 = {-0.99312859918509488, -0.96397192727791381, -0.91223442825132584,
                                         -0.83911697182221878, -0.7463319064601508,  -0.63605368072651502,
                                         -0.51086700195082713, -0.37370608871541955, -0.2277858511416451,
                                         -0.076526521133497338};
constexpr std::array<double, 10> kW20 = {0.017614007139153273, 0.040601429800386217, 0.062672048334109443,
                                         0.083276741576704671, 0.10193011981724026,  0.11819453196151825,
                                         0.13168863844917653,  0.14209610931838187,  0.14917298647260366,
                                         0.15275338713072578};

double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + " must be finite");
}

void require_rho(double rho) {
  if (std::isnan(rho) || std::abs(rho) > 1.0) throw DomainError("correlation must lie in [-1, 1]");
}

// Genz BVND: P(X > dh, Y > dk) for |r| < 1.
double bvn_upper(double dh, double dk, double r) {
  std::span<const double> x, w;
  if (std::abs(r) < 0.3) {
    x = kX6, w = kW6;
  } else if (std::abs(r) < 0.75) {
    x = kX12, w = kW12;
  } else {
    x = kX20, w = kW20;
  }
  double h = dh, k = dk, hk = h * k, bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double sn = std::sin(asr * (x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * kTwoPi) + phi(-h) * phi(-k);
  }
  if (r < 0) {
    k = -k;
    hk = -hk;
  }
  const double as = (1.0 - r) * (1.0 + r);
  double a = std::sqrt(as);
  const double bs = (h - k) * (h - k);
  const double c = (4.0 - hk) / 8.0;
  const double d = (12.0 - hk) / 16.0;
  bvn = a * std::exp(-(bs / as + hk) / 2.0) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
  if (hk > -160.0) {
    const double b = std::sqrt(bs);
    bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * phi(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
  }
  a /= 2.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double sgn : {-1.0, 1.0}) {
      const double xs = (a * (sgn * x[i] + 1.0)) * (a * (sgn * x[i] + 1.0));
      const double rs = std::sqrt(1.0 - xs);
      bvn += a * w[i] *
             (std::exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs - std::exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
    }
  }
  bvn = -bvn / kTwoPi;
  if (r > 0) return bvn + phi(-std::max(h, k));
  bvn = -bvn;
  if (k > h) bvn += (h < 0) ? phi(k) - phi(h) : phi(-h) - phi(-k);
  return bvn;
}

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log of (1/2pi) * integral_0^{|asin rho|} exp((hk sin t - (h^2+k^2)/2) / cos^2 t) dt,
// composite 20-point Gauss-Legendre over `panels` equal panels.
double log_dependence_integral(double h, double k, double rho, int panels) {
  const double hk = h * k * (rho < 0 ? -1.0 : 1.0);
  const double hs = (h * h + k * k) / 2.0;
  const double upper = std::asin(std::abs(rho));
  const double width = upper / panels;
  double acc = -kInf;
  for (int p = 0; p < panels; ++p) {
    const double lo = p * width;
    for (std::size_t i = 0; i < kX20.size(); ++i) {
      for (double sgn : {-1.0, 1.0}) {
        const double t = lo + width * (sgn * kX20[i] + 1.0) / 2.0;
        const double sn = std::sin(t);
        const double cs2 = 1.0 - sn * sn;
        if (cs2 <= 0.0) continue;
        acc = log_add_exp(acc, std::log(kW20[i]) + (sn * hk - hs) / cs2);
      }
    }
  }
  return acc + std::log(width / 2.0) - std::log(kTwoPi);
}

// Signed log|Phi2 - Phi Phi|. Returns {log magnitude, sign}.
std::pair<double, int> log_dependence(double h, double k, double rho) {
  if (rho == 0.0) return {-kInf, 0};
  const int sign = rho > 0 ? 1 : -1;
  if (std::abs(rho) < 0.925) return {log_dependence_integral(h, k, rho, 1), sign};
  if (std::abs(rho) < 1.0) {
    const double direct = bvn_cdf(h, k, rho) - phi(h) * phi(k);
    if (direct * sign > 1e-12) return {std::log(std::abs(direct)), sign};
    return {log_dependence_integral(h, k, rho, 64), sign};
  }
  const double direct = bvn_cdf(h, k, rho) - phi(h) * phi(k);
  return {direct == 0.0 ? -kInf : std::log(std::abs(direct)), sign};
}

constexpr double kSmallBvn = 1e-7;

// log Phi2(h, k, rho) by integrating phi(x) Phi((k - rho x)/s) over x <= h in log space.
double log_bvn_integral(double h, double k, double rho) {
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  auto f = [&](double t) {
    const double x = h - t;
    return -0.5 * x * x - kLogSqrtTwoPi + log_std_normal_cdf((k - rho * x) / s);
  };
  // Log-concave in t: golden-section search for the mode on [0, hi].
  double hi = 1.0;
  while (f(hi) > f(hi / 2.0) && hi < 1e6) hi *= 2.0;
  double lo = 0.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  for (int it = 0; it < 200 && b - a > 1e-12 * (1.0 + b); ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (f(c) >= f(d)) b = d; else a = c;
  }
  const double mode = 0.5 * (a + b);
  const double fmax = f(mode);
  double left = mode, right = mode, step = 1e-3 * (1.0 + mode);
  while (left > 0.0 && f(left) > fmax - 60.0) left = std::max(0.0, left - (step *= 2.0));
  step = 1e-3 * (1.0 + mode);
  while (f(right) > fmax - 60.0) right += (step *= 2.0);
  constexpr int panels = 48;  // 20-point Gauss-Legendre each
  const double width = (right - left) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = left + (p + 0.5) * width;
    for (std::size_t i = 0; i < kX20.size(); ++i) {
      sum += kW20[i] * (std::exp(f(mid - 0.5 * width * kX20[i]) - fmax) + std::exp(f(mid + 0.5 * width * kX20[i]) - fmax));
    }
  }
  return fmax + std::log(sum * width / 2.0);
}

// Robert (1995) for the right tail [a, b), a >= 3.5 standardized.
double sample_right_tail(double a, double b, Rng& rng) {
  if (std::isfinite(b) && b - a < 1.0 / a) {
    for (;;) {
      const double z = a + (b - a) * uniform01(rng);
      if (std::log(uniform01(rng)) <= (a * a - z * z) / 2.0) return z;
    }
  }
  const double alpha = (a + std::sqrt(a * a + 4.0)) / 2.0;
  for (;;) {
    const double z = a - std::log(uniform01(rng)) / alpha;
    if (z >= b) continue;
    const double dz = z - alpha;
    if (std::log(uniform01(rng)) <= -dz * dz / 2.0) return z;
  }
}

// Inverse CDF on (a, b) with b > -3.5 and a <= 0.
double sample_inverse_cdf(double a, double b, Rng& rng) {
  const double pa = std::isfinite(a) ? phi(a) : 0.0;
  const double pb = std::isfinite(b) ? phi(b) : 1.0;
  for (;;) {
    const double u = pa + (pb - pa) * uniform01(rng);
    if (u <= 0.0 || u >= 1.0) continue;
    const double z = std_normal_quantile(u);
    if (z > a && z < b) return z;
  }
}

}  // namespace

void BvnParams::validate() const {
  require_finite(mu1, "mu1");
  require_finite(mu2, "mu2");
  require_rho(rho);
}

double std_normal_cdf(double x) {
  require_finite(x, "normal cdf argument");
  return phi(x);
}

double log_std_normal_cdf(double x) {
  if (std::isnan(x)) throw DomainError("log normal cdf argument is NaN");
  if (x == kInf) return 0.0;
  if (x == -kInf) return -kInf;
  if (x > 5.0) return std::log1p(-phi(-x));
  if (x > -37.0) return std::log(phi(x));
  const double x2 = x * x;
  const double inv = 1.0 / x2;
  const double series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv * (1.0 - 9.0 * inv))));
  return -0.5 * x2 - std::log(-x) - kLogSqrtTwoPi + std::log(series);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile probability must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double bvn_cdf(double h, double k, double rho) {
  if (std::isnan(h) || std::isnan(k)) throw DomainError("bvn_cdf limits must not be NaN");
  require_rho(rho);
  if (h > k) std::swap(h, k);  // symmetric to the last bit
  if (h == -kInf || k == -kInf) return 0.0;
  if (h == kInf) return k == kInf ? 1.0 : phi(k);
  if (k == kInf) return phi(h);
  if (rho == 1.0) return phi(std::min(h, k));
  if (rho == -1.0) return h + k <= 0.0 ? 0.0 : phi(h) - phi(-k);
  const double v = std::clamp(bvn_upper(-h, -k, rho), 0.0, 1.0);
  // Small values are differences of much larger terms; redo them in log space.
  if (v < kSmallBvn && rho != 0.0) return std::exp(log_bvn_integral(h, k, rho));
  return v;
}

double log_bvn_cdf(double h, double k, double rho) {
  const double v = bvn_cdf(h, k, rho);
  if (v > 1e-280) return std::log(v);  // relatively accurate on every path of bvn_cdf
  if (h == -kInf || k == -kInf) return -kInf;
  if (h == kInf) return log_std_normal_cdf(k);
  if (k == kInf) return log_std_normal_cdf(h);
  if (rho == 1.0) return log_std_normal_cdf(std::min(h, k));
  if (rho == -1.0) {
    if (h + k <= 0.0) return -kInf;
    const double la = log_std_normal_cdf(h), lb = log_std_normal_cdf(-k);
    return la > lb ? la + std::log1p(-std::exp(lb - la)) : lb + std::log1p(-std::exp(la - lb));
  }
  if (rho == 0.0) return log_std_normal_cdf(h) + log_std_normal_cdf(k);
  return log_bvn_integral(h, k, rho);
}

double bvn_dependence(double h, double k, double rho) {
  if (std::isnan(h) || std::isnan(k)) throw DomainError("bvn_dependence limits must not be NaN");
  require_rho(rho);
  if (!std::isfinite(h) || !std::isfinite(k)) return 0.0;
  const auto [mag, sign] = log_dependence(h, k, rho);
  return sign * std::exp(mag);
}

PairTable cell_probs(const BvnParams& params) {
  params.validate();
  const auto [m1, m2, r] = params;
  return PairTable{bvn_cdf(-m1, -m2, r), bvn_cdf(-m1, m2, -r), bvn_cdf(m1, -m2, -r), bvn_cdf(m1, m2, r)};
}

LogPairTable log_cell_probs(const BvnParams& params) {
  params.validate();
  const auto [m1, m2, r] = params;
  return LogPairTable{log_bvn_cdf(-m1, -m2, r), log_bvn_cdf(-m1, m2, -r), log_bvn_cdf(m1, -m2, -r),
                      log_bvn_cdf(m1, m2, r)};
}

double log_odds_from_bvn(const BvnParams& params) {
  params.validate();
  if (params.rho == 0.0) return 0.0;
  const LogPairTable lt = log_cell_probs(params);
  const double direct = lt.l00 + lt.l11 - lt.l01 - lt.l10;
  if (std::abs(params.rho) == 1.0) return direct;  // may be +-inf: degenerate table
  // p00 p11 = p01 p10 + delta, delta = Phi2 - Phi Phi has the sign of rho.
  const auto [ldelta, sign] = log_dependence(-params.mu1, -params.mu2, params.rho);
  if (ldelta == -kInf) return 0.0;
  const double lr = ldelta - lt.l01 - lt.l10;
  if (sign > 0) {
    if (lr > 30.0) return lr + std::log1p(std::exp(-lr));
    return std::log1p(std::exp(lr));
  }
  const double r = std::exp(lr);
  if (r < 0.5) return std::log1p(-r);
  return std::min(direct, -0.4);  // theta <= 1/2 here; guard rounding on the sign
}

double sample_truncated_normal(double mean, double sd, double lower, double upper, Rng& rng) {
  require_finite(mean, "truncated normal mean");
  if (!(sd > 0.0) || !std::isfinite(sd)) throw DomainError("truncated normal sd must be positive and finite");
  if (std::isnan(lower) || std::isnan(upper) || !(lower < upper))
    throw DomainError("truncated normal interval is empty");
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  double z;
  if (a >= 3.5) {
    z = sample_right_tail(a, b, rng);
  } else if (b <= -3.5) {
    z = -sample_right_tail(-b, -a, rng);
  } else if (a > 0.0) {
    z = -sample_inverse_cdf(-b, -a, rng);
  } else {
    z = sample_inverse_cdf(a, b, rng);
  }
  const double draw = mean + sd * z;
  if (draw <= lower) return std::nextafter(lower, kInf);
  if (draw >= upper) return std::nextafter(upper, -kInf);
  return draw;
}

}  // namespace jsdm
