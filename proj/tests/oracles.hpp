#pragma once

// Reference computations that share no code with the library.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/owens_t.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Bivariate normal CDF from Owen's T function (h, k nonzero, |rho| < 1).
inline double bvn_owen(double h, double k, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  const double ah = (k - rho * h) / (h * s);
  const double ak = (h - rho * k) / (k * s);
  const double beta = (h * k < 0.0) ? 0.5 : 0.0;
  return 0.5 * (phi_cdf(h) + phi_cdf(k)) - boost::math::owens_t(h, ah) - boost::math::owens_t(k, ak) - beta;
}

struct Cells {
  double p00, p01, p10, p11;
};

/// Orthant table of the latent pair with means (m1, m2) thresholded at 0.
inline Cells orthants_owen(double m1, double m2, double rho) {
  return {bvn_owen(-m1, -m2, rho), bvn_owen(-m1, m2, -rho), bvn_owen(m1, -m2, -rho), bvn_owen(m1, m2, rho)};
}

/// Independent standard normal pairs shared across Monte Carlo checks.
struct NormalPairs {
  std::vector<double> z1, z2;
  NormalPairs(std::size_t n, std::uint64_t seed) : z1(n), z2(n) {
    std::mt19937 gen(static_cast<std::mt19937::result_type>(seed));
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < n; ++i) {
      z1[i] = normal(gen);
      z2[i] = normal(gen);
    }
  }
  std::size_t size() const { return z1.size(); }
};

/// Frequencies of the four presence patterns of (m1 + X1, m2 + X2), corr(X1, X2) = rho.
inline Cells mc_orthants(const NormalPairs& z, double m1, double m2, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  std::uint64_t c[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double a = m1 + z.z1[i];
    const double b = m2 + rho * z.z1[i] + s * z.z2[i];
    ++c[2 * (a >= 0.0) + (b >= 0.0)];
  }
  const double n = static_cast<double>(z.size());
  return {c[0] / n, c[1] / n, c[2] / n, c[3] / n};
}

/// Binomial standard error of a frequency estimate.
inline double binomial_se(double p, double n) { return std::sqrt(std::max(p * (1.0 - p), 1e-300) / n); }

}  // namespace oracle
