#include <doctest.h>

#include <cmath>
#include <numbers>

#include "jsdm/errors.hpp"
#include "jsdm/inference.hpp"
#include "jsdm/prob_core.hpp"
#include "oracles.hpp"

using namespace jsdm;

namespace {

/// Draws over n sites on a line with design [1, x_i], all sharing the given B and Lambda.
PosteriorDraws hand_draws(const std::vector<MatrixXd>& B, const std::vector<MatrixXd>& Lambda, Index n = 4,
                          bool spatial = false, double phi = 2.0) {
  PosteriorDraws d;
  d.config.spatial = spatial;
  d.config.r = Lambda.front().cols();
  const Index p = B.front().cols();
  d.X = MatrixXd::Ones(n, p);
  d.coords = Coords::Zero(n, 2);
  for (Index i = 0; i < n; ++i) {
    d.coords(i, 0) = static_cast<double>(i) / static_cast<double>(n);
    if (p > 1) d.X(i, 1) = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
  }
  for (Index s = 0; s < B.front().rows(); ++s) d.species_names.push_back("sp" + std::to_string(s + 1));
  for (std::size_t k = 0; k < B.size(); ++k) {
    d.B.push_back(B[k]);
    d.Lambda.push_back(Lambda[k]);
    d.W.push_back(MatrixXd::Zero(n, Lambda[k].cols()));
    d.H.push_back(assemble_sigma_star(Lambda[k], 1.0).H);
    d.phi.push_back(phi);
  }
  d.validate();
  return d;
}

PredictionGrid line_grid(const MatrixXd& design) {
  PredictionGrid g;
  g.spec = GridSpec{design.rows(), 1, 0.0, 1.0, 0.0, 0.0};
  g.nodes = Coords::Zero(design.rows(), 2);
  for (Index k = 0; k < design.rows(); ++k) g.nodes(k, 0) = static_cast<double>(k);
  g.design = design;
  g.mask.assign(design.rows(), 0);
  return g;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_pair_method("analytic") == PairMethod::analytic);
  CHECK(parse_pair_method("mc") == PairMethod::monte_carlo);
  CHECK(parse_pair_method("conditional") == PairMethod::conditional);
  CHECK(to_string(PairMethod::monte_carlo) == "mc");
  CHECK_THROWS_AS(parse_pair_method("exact"), StructuralError);
}

TEST_CASE("zero loadings give unit odds in every draw") {
  const PosteriorDraws d = hand_draws({(MatrixXd(2, 2) << 0.4, 1.0, -0.2, 0.7).finished()}, {MatrixXd::Zero(2, 1)});
  for (Index i = 0; i < d.X.rows(); ++i) {
    const auto t = pair_table_draws(d, Location::data_site(i), 0, 1, PairMethod::analytic);
    CHECK(std::abs(odds_ratio(t[0]).log()) < 1e-14);
  }
}

TEST_CASE("shared unit loadings give p11 of one third") {
  const PosteriorDraws d = hand_draws({MatrixXd::Zero(2, 1)}, {MatrixXd::Ones(2, 1)});
  const auto t = pair_table_draws(d, Location::data_site(0), 0, 1, PairMethod::analytic);
  CHECK(t[0].p11 == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(t[0].p00 == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(t[0].p01 == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("analytic and Monte Carlo tables agree") {
  const PosteriorDraws d = hand_draws({(MatrixXd(2, 2) << 0.3, 0.5, -0.4, 0.2).finished(),
                                       (MatrixXd(2, 2) << -0.6, 0.1, 0.9, -0.3).finished()},
                                      {(MatrixXd(2, 1) << 1.2, -0.8).finished(), (MatrixXd(2, 1) << 0.5, 1.5).finished()});
  PairTableOptions opt;
  opt.mc_draws = 1000000;
  opt.seed = 11;
  const auto a = pair_table_draws(d, Location::data_site(1), 0, 1, PairMethod::analytic);
  const auto m = pair_table_draws(d, Location::data_site(1), 0, 1, PairMethod::monte_carlo, opt);
  REQUIRE(m.size() == 2);
  const double M = static_cast<double>(opt.mc_draws);
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (auto cell : {&PairTable::p00, &PairTable::p01, &PairTable::p10, &PairTable::p11}) {
      CHECK(std::abs(m[k].*cell - a[k].*cell) <= 4 * oracle::binomial_se(a[k].*cell, M));
    }
  }
}

TEST_CASE("conditional tables at data sites factor given the stored field") {
  PosteriorDraws d = hand_draws({(MatrixXd(2, 2) << 0.3, 0.5, -0.4, 0.2).finished()},
                                {(MatrixXd(2, 1) << 1.2, -0.8).finished()});
  d.W[0](2, 0) = 0.7;
  const auto t = pair_table_draws(d, Location::data_site(2), 0, 1, PairMethod::conditional);
  const VectorXd x = d.X.row(2).transpose();
  const double m1 = d.B[0].row(0).dot(x) + 1.2 * 0.7;
  const double m2 = d.B[0].row(1).dot(x) - 0.8 * 0.7;
  CHECK(t[0].p11 == doctest::Approx(oracle::phi_cdf(m1) * oracle::phi_cdf(m2)).epsilon(1e-14));
  CHECK(t[0].p00 == doctest::Approx(oracle::phi_cdf(-m1) * oracle::phi_cdf(-m2)).epsilon(1e-14));
  CHECK(odds_ratio(t[0]).log() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("conditional tables at new points average over the kriged field") {
  PosteriorDraws d = hand_draws({MatrixXd::Zero(2, 1)}, {MatrixXd::Ones(2, 1)}, 3, true);
  PairTableOptions opt;
  opt.kriged_samples = 20000;
  // Far from every site the field reverts to its prior, so the average is the marginal table.
  const Location far = Location::point(VectorXd::Ones(1), Eigen::Vector2d(50.0, 50.0));
  const auto t = pair_table_draws(d, far, 0, 1, PairMethod::conditional, opt);
  CHECK(std::abs(t[0].p11 - 1.0 / 3.0) < 0.01);
  const auto again = pair_table_draws(d, far, 0, 1, PairMethod::conditional, opt);
  CHECK(again[0].p11 == t[0].p11);
}

TEST_CASE("odds surface composes per-draw log odds") {
  const std::vector<MatrixXd> B = {(MatrixXd(3, 2) << 0.3, 0.5, -0.4, 0.2, 0.0, 1.0).finished(),
                                   (MatrixXd(3, 2) << -0.6, 0.1, 0.9, -0.3, 0.2, 0.0).finished()};
  const std::vector<MatrixXd> L = {(MatrixXd(3, 1) << 1.2, -0.8, 0.3).finished(),
                                   (MatrixXd(3, 1) << 0.5, 0.2, -1.0).finished()};
  const PosteriorDraws d = hand_draws(B, L);
  const PredictionGrid g = line_grid((MatrixXd(3, 2) << 1, -1, 1, 0.2, 1, 1.5).finished());
  const SurfaceGrid s = odds_surface(d, g, 0, 1);
  for (Index k = 0; k < 3; ++k) {
    double l[2];
    for (int t = 0; t < 2; ++t) {
      const ModelParams p = d.params(t);
      const VectorXd x = g.design.row(k).transpose();
      l[t] = log_odds_from_bvn(pair_latent_params(p, x, FactorMoments::prior(1), 0, 1)) / std::numbers::ln10;
    }
    const double lo = std::min(l[0], l[1]), hi = std::max(l[0], l[1]);
    CHECK(s.mean_log10_theta(k) == doctest::Approx((l[0] + l[1]) / 2).epsilon(1e-12));
    CHECK(s.q05(k) == doctest::Approx(lo + 0.05 * (hi - lo)).epsilon(1e-12));
    CHECK(s.q95(k) == doctest::Approx(lo + 0.95 * (hi - lo)).epsilon(1e-12));
    CHECK(s.p_exceed(k) == ((l[0] > 0) + (l[1] > 0)) / 2.0);
  }
  // First draw loads the pair in opposite directions, second in the same one.
  CHECK(s.p_exceed(0) == 0.5);

  const SurfaceGrid serial = odds_surface(d, g, 0, 1, {.parallel = false});
  CHECK(serial.mean_log10_theta == s.mean_log10_theta);
  CHECK(serial.p11_mean == s.p11_mean);
}

TEST_CASE("odds surface under zero and shared loadings") {
  const PredictionGrid g = line_grid((MatrixXd(4, 2) << 1, -2, 1, 0, 1, 0.5, 1, 2).finished());
  const PosteriorDraws zero = hand_draws({(MatrixXd(2, 2) << 0.3, 0.5, -0.4, 0.2).finished()}, {MatrixXd::Zero(2, 1)});
  const SurfaceGrid z = odds_surface(zero, g, 0, 1);
  CHECK(z.mean_log10_theta.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(z.p_exceed.maxCoeff() == 0.0);

  const PosteriorDraws pos = hand_draws({(MatrixXd(2, 2) << 0.3, 0.5, -0.4, 0.2).finished(),
                                         (MatrixXd(2, 2) << 0.1, -0.5, 0.4, 0.9).finished()},
                                        {(MatrixXd(2, 1) << 0.7, 0.4).finished(), (MatrixXd(2, 1) << 1.1, 0.2).finished()});
  const SurfaceGrid s = odds_surface(pos, g, 0, 1);
  CHECK(s.q05.minCoeff() > 0.0);
  CHECK(s.p_exceed.minCoeff() == 1.0);

  SurfaceOptions mc;
  mc.method = PairMethod::monte_carlo;
  mc.pair.mc_draws = 200000;
  const SurfaceGrid m = odds_surface(pos, g, 0, 1, mc);
  CHECK((m.mean_log10_theta - s.mean_log10_theta).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("sparse Monte Carlo tables do not break summaries") {
  // Species 1 is almost never absent here, so a few hundred pairs often leave p00 = p01 = 0.
  const PosteriorDraws d = hand_draws({(MatrixXd(2, 1) << 3.5, 0.0).finished(), (MatrixXd(2, 1) << 3.6, 0.1).finished()},
                                      {(MatrixXd(2, 1) << 0.2, 0.3).finished(), (MatrixXd(2, 1) << 0.1, 0.2).finished()});
  SurfaceOptions o;
  o.method = PairMethod::monte_carlo;
  o.pair.mc_draws = 200;
  o.keep_draws = true;
  const SurfaceGrid s = odds_surface(d, line_grid(MatrixXd::Ones(6, 1)), 0, 1, o);
  CHECK(s.ln_theta_draws.array().isNaN().any());
  for (Index k = 0; k < 6; ++k) {
    CHECK(std::isfinite(s.p11_mean(k)));
    const bool all_nan = s.ln_theta_draws.row(k).array().isNaN().all();
    CHECK(std::isnan(s.mean_log10_theta(k)) == all_nan);
  }
}

TEST_CASE("masked nodes stay empty") {
  PredictionGrid g = line_grid((MatrixXd(3, 2) << 1, -1, 1, 0, 1, 1).finished());
  g.mask[1] = 1;
  const PosteriorDraws d = hand_draws({(MatrixXd(2, 2) << 0.3, 0.5, -0.4, 0.2).finished()},
                                      {(MatrixXd(2, 1) << 0.7, 0.4).finished()});
  for (PairMethod m : {PairMethod::analytic, PairMethod::monte_carlo}) {
    SurfaceOptions o;
    o.method = m;
    o.pair.mc_draws = 1000;
    const SurfaceGrid s = odds_surface(d, g, 0, 1, o);
    CHECK(std::isnan(s.mean_log10_theta(1)));
    CHECK(std::isfinite(s.mean_log10_theta(2)));
  }
  CHECK_THROWS_AS(odds_surface(d, line_grid(MatrixXd::Ones(2, 3)), 0, 1), StructuralError);
  CHECK_THROWS_AS(odds_surface(d, g, 0, 2), StructuralError);
}

TEST_CASE("kriged factors") {
  PosteriorDraws d = hand_draws({MatrixXd::Zero(2, 1)}, {(MatrixXd(2, 1) << 1.0, 0.5).finished()}, 3, true, 1.5);
  d.coords << 0.0, 0.0, 1.0, 0.0, 0.0, 2.0;
  d.W[0] << 0.4, -1.1, 0.8;

  Coords targets(3, 2);
  targets << 1.0, 0.0, 500.0, 500.0, 0.6, 0.7;
  const auto k = krige_factors(d, targets);
  REQUIRE(k.size() == 1);
  CHECK(k[0].mean(0, 0) == doctest::Approx(-1.1).epsilon(1e-6));
  CHECK(k[0].variance(0) < 1e-6);
  CHECK(std::abs(k[0].mean(1, 0)) < 1e-12);
  CHECK(k[0].variance(1) == doctest::Approx(1.0).epsilon(1e-12));

  MatrixXd K(3, 3);
  Eigen::Vector3d c;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) K(a, b) = std::exp(-1.5 * (d.coords.row(a) - d.coords.row(b)).norm());
    c(a) = std::exp(-1.5 * (d.coords.row(a) - targets.row(2)).norm());
  }
  const Eigen::Vector3d wts = K.ldlt().solve(c);
  CHECK(k[0].mean(2, 0) == doctest::Approx(wts.dot(d.W[0].col(0))).epsilon(1e-9));
  CHECK(k[0].variance(2) == doctest::Approx(1.0 - c.dot(wts)).epsilon(1e-9));

  PosteriorDraws flat = d;
  flat.config.spatial = false;
  const auto f = krige_factors(flat, targets);
  CHECK(f[0].mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(f[0].variance.minCoeff() == 1.0);
}

TEST_CASE("richness under independence") {
  const PosteriorDraws d = hand_draws({MatrixXd::Zero(6, 1)}, {MatrixXd::Zero(6, 1)});
  const RichnessSummary r = richness_stats(d, 0);
  CHECK(r.mean == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(r.variance == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(r.independence_variance == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("richness of a perfectly dependent pair") {
  const double lambda = 1e6;
  const double mu = 0.8;
  MatrixXd B(2, 1);
  B.setConstant(mu * std::sqrt(lambda * lambda + 1.0));
  const PosteriorDraws d = hand_draws({B}, {MatrixXd::Constant(2, 1, lambda)});
  const RichnessSummary r = richness_stats(d, 0);
  const double p = oracle::phi_cdf(mu);
  CHECK(r.mean == doctest::Approx(2 * p).epsilon(1e-12));
  CHECK(std::abs(r.variance - 4 * p * (1 - p)) < 1e-5);
  CHECK(r.independence_variance == doctest::Approx(2 * p * (1 - p)).epsilon(1e-12));
}

TEST_CASE("richness mean identity and between-draw variance") {
  Rng rng(21);
  std::vector<MatrixXd> B, L;
  for (int t = 0; t < 5; ++t) {
    MatrixXd b(5, 2), l(5, 2);
    for (Index i = 0; i < 5; ++i) {
      for (Index h = 0; h < 2; ++h) {
        b(i, h) = std_normal_draw(rng);
        l(i, h) = std_normal_draw(rng);
      }
    }
    B.push_back(b);
    L.push_back(l);
  }
  const PosteriorDraws d = hand_draws(B, L);
  const VectorXd x = (VectorXd(2) << 1.0, 0.35).finished();
  const RichnessSummary r = richness_stats(d, x);
  double mean = 0.0, mean_sq = 0.0, within = 0.0;
  for (int t = 0; t < 5; ++t) {
    VectorXd mu(5);
    double s = 0.0;
    for (Index j = 0; j < 5; ++j) {
      mu(j) = B[t].row(j).dot(x) / std::sqrt(L[t].row(j).squaredNorm() + 1.0);
      s += oracle::phi_cdf(mu(j));
      within += oracle::phi_cdf(mu(j)) * oracle::phi_cdf(-mu(j)) / 5.0;
    }
    for (Index a = 0; a < 5; ++a) {
      for (Index b = a + 1; b < 5; ++b) {
        const double rho = L[t].row(a).dot(L[t].row(b)) /
                           std::sqrt((L[t].row(a).squaredNorm() + 1.0) * (L[t].row(b).squaredNorm() + 1.0));
        within += 2.0 * (oracle::bvn_owen(mu(a), mu(b), rho) - oracle::phi_cdf(mu(a)) * oracle::phi_cdf(mu(b))) / 5.0;
      }
    }
    mean += s / 5.0;
    mean_sq += s * s / 5.0;
  }
  CHECK(std::abs(r.mean - mean) < 1e-12);
  CHECK(r.variance == doctest::Approx(within + mean_sq - mean * mean).epsilon(1e-10));
  CHECK_THROWS_AS(richness_stats(d, VectorXd::Ones(3)), StructuralError);
}

TEST_CASE("homogeneity odds") {
  MatrixXd B(3, 1);
  B << std_normal_quantile(0.8), 0.0, 40.0;
  const PosteriorDraws d = hand_draws({B}, {MatrixXd::Zero(3, 1)});
  CHECK(homogeneity_odds(d, 0, 1, 1)[0].log() == 0.0);
  CHECK(homogeneity_odds(d, 0, 0, 1)[0].value() == doctest::Approx(4.0).epsilon(1e-12));
  const double a = homogeneity_odds(d, 0, 0, 2)[0].log();
  const double b = homogeneity_odds(d, 0, 2, 1)[0].log();
  CHECK(std::isfinite(a));
  CHECK(a + b == doctest::Approx(homogeneity_odds(d, 0, 0, 1)[0].log()).epsilon(1e-12));
}

TEST_CASE("sample quantiles") {
  CHECK(sample_quantile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(sample_quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(sample_quantile({4, 1, 3, 2}, 1.0) == 4.0);
  CHECK(sample_quantile({1, 2, 3, 4, 5}, 0.05) == doctest::Approx(1.2));
  CHECK(sample_quantile({-kInf, 1.0, kInf}, 0.5) == 1.0);
  CHECK(sample_quantile({1.0, kInf}, 0.95) == kInf);
  CHECK_THROWS_AS(sample_quantile({}, 0.5), StructuralError);
  CHECK_THROWS_AS(sample_quantile({1.0}, 1.5), DomainError);
}
