#include <doctest.h>

#include <cmath>
#include <random>

#include "jsdm/errors.hpp"
#include "jsdm/gp.hpp"
#include "jsdm/model.hpp"

using namespace jsdm;

namespace {

ModelParams small_params() {
  ModelParams p;
  p.B = (MatrixXd(2, 2) << 0.5, -1.0, 0.2, 0.3).finished();
  p.Lambda = (MatrixXd(2, 1) << 0.8, -0.6).finished();
  p.W = (MatrixXd(3, 1) << 0.1, -1.2, 2.0).finished();
  return p;
}

}  // namespace

TEST_CASE("linear_predictor") {
  const ModelParams p = small_params();
  const MatrixXd X = (MatrixXd(3, 2) << 1, 0.4, 1, -2.0, 1, 1.5).finished();
  const MatrixXd eta = linear_predictor(p, X);
  REQUIRE(eta.rows() == 3);
  REQUIRE(eta.cols() == 2);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 2; ++j) {
      double v = 0;
      for (Index c = 0; c < 2; ++c) v += p.B(j, c) * X(i, c);
      v += p.Lambda(j, 0) * p.W(i, 0);
      CHECK(eta(i, j) == doctest::Approx(v).epsilon(1e-15));
    }
  }
  // Hand evaluation of one entry: 0.2*1 + 0.3*(-2) + (-0.6)(-1.2) = 0.32.
  CHECK(eta(1, 1) == doctest::Approx(0.32).epsilon(1e-14));

  ModelParams zero = p;
  zero.B.setZero();
  zero.Lambda.setZero();
  CHECK(linear_predictor(zero, X).isZero(0.0));

  ModelParams fixed_only = p;
  fixed_only.Lambda.resize(2, 0);
  fixed_only.W.resize(3, 0);
  CHECK((linear_predictor(fixed_only, X) - X * p.B.transpose()).isZero(0.0));

  CHECK_THROWS_AS(linear_predictor(p, MatrixXd::Ones(3, 3)), StructuralError);
  CHECK_THROWS_AS(linear_predictor(p, MatrixXd::Ones(4, 2)), StructuralError);
}

TEST_CASE("assemble_sigma_star") {
  const SpeciesCovariance id = assemble_sigma_star(MatrixXd::Zero(3, 2), 1.0);
  CHECK(id.sigma_star.isIdentity(0.0));
  CHECK(id.H.isIdentity(0.0));

  const SpeciesCovariance c = assemble_sigma_star(MatrixXd::Ones(2, 1), 1.0);
  CHECK(c.sigma_star(0, 0) == 2.0);
  CHECK(c.sigma_star(0, 1) == 1.0);
  CHECK(c.sigma_star(1, 1) == 2.0);
  CHECK(c.H(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  std::mt19937_64 gen(3);
  std::normal_distribution<double> n;
  MatrixXd L(5, 2);
  for (Index j = 0; j < 5; ++j) {
    for (Index h = 0; h < 2; ++h) L(j, h) = n(gen);
  }
  const SpeciesCovariance r = assemble_sigma_star(L, 0.7);
  for (Index a = 0; a < 5; ++a) {
    CHECK(r.H(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    for (Index b = 0; b < 5; ++b) {
      double cov = a == b ? 0.7 : 0.0, va = 0.7, vb = 0.7;
      for (Index h = 0; h < 2; ++h) {
        cov += L(a, h) * L(b, h);
        va += L(a, h) * L(a, h);
        vb += L(b, h) * L(b, h);
      }
      CHECK(r.sigma_star(a, b) == doctest::Approx(cov).epsilon(1e-14));
      CHECK(r.H(a, b) == doctest::Approx(cov / std::sqrt(va * vb)).epsilon(1e-14));
    }
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(r.H);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  CHECK_THROWS_AS(assemble_sigma_star(L, 0.0), DomainError);
}

TEST_CASE("pair_latent_params modes") {
  ModelParams zero;
  zero.B = MatrixXd::Zero(2, 2);
  zero.Lambda = MatrixXd::Zero(2, 1);
  const VectorXd x = (VectorXd(2) << 1.0, 0.3).finished();
  const BvnParams z = pair_latent_params(zero, x, VectorXd::Zero(1), 0, 1, LatentMode::marginal);
  CHECK(z.mu1 == 0.0);
  CHECK(z.mu2 == 0.0);
  CHECK(z.rho == 0.0);

  ModelParams p;
  p.B = (MatrixXd(2, 1) << 0.5, -0.5).finished();
  p.Lambda = MatrixXd::Ones(2, 1);
  const VectorXd one = VectorXd::Ones(1);
  const BvnParams m = pair_latent_params(p, one, VectorXd::Zero(1), 0, 1, LatentMode::marginal);
  CHECK(m.mu1 == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(m.mu2 == doctest::Approx(-0.5 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(m.rho == doctest::Approx(0.5).epsilon(1e-15));

  const VectorXd w = (VectorXd(1) << 0.7).finished();
  const BvnParams c = pair_latent_params(p, one, w, 0, 1, LatentMode::conditional);
  CHECK(c.rho == 0.0);
  CHECK(c.mu1 == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(c.mu2 == doctest::Approx(0.2).epsilon(1e-15));

  // Prior factor moments reproduce marginal mode; a degenerate moment reproduces conditional mode.
  const BvnParams pm = pair_latent_params(p, one, FactorMoments::prior(1), 0, 1);
  CHECK(pm.mu1 == doctest::Approx(m.mu1).epsilon(1e-15));
  CHECK(pm.rho == doctest::Approx(m.rho).epsilon(1e-15));
  const BvnParams pc = pair_latent_params(p, one, FactorMoments{w, 0.0}, 0, 1);
  CHECK(pc.mu1 == doctest::Approx(c.mu1).epsilon(1e-15));
  CHECK(pc.rho == 0.0);

  CHECK_THROWS_AS(pair_latent_params(p, one, w, 0, 2, LatentMode::marginal), StructuralError);
  CHECK_THROWS_AS(pair_latent_params(p, one, w, 0, 1, static_cast<LatentMode>(9)), StructuralError);
  CHECK_THROWS_AS(pair_latent_params(p, VectorXd::Ones(3), w, 0, 1, LatentMode::marginal), StructuralError);
}

TEST_CASE("latent_marginal matches the pairwise construction") {
  ModelParams p = small_params();
  const VectorXd x = (VectorXd(2) << 1.0, -0.4).finished();
  const LatentMarginal lm = latent_marginal(p, x, FactorMoments::prior(1));
  const BvnParams bp = pair_latent_params(p, x, FactorMoments::prior(1), 0, 1);
  CHECK(lm.mean(0) == doctest::Approx(bp.mu1).epsilon(1e-15));
  CHECK(lm.mean(1) == doctest::Approx(bp.mu2).epsilon(1e-15));
  CHECK(lm.corr(0, 1) == doctest::Approx(bp.rho).epsilon(1e-15));
}

TEST_CASE("ModelParams validation and parameter count") {
  ModelParams p;
  p.B = MatrixXd::Zero(4, 2);
  p.Lambda = (MatrixXd(4, 2) << 0.5, 0, -0.3, 0.8, 0.1, 0.2, 0.4, -0.9).finished();
  CHECK(p.covariance_parameter_count() == 4 * 2 + 1);
  CHECK(p.satisfies_loading_constraint());
  CHECK_NOTHROW(p.validate());
  p.Lambda(0, 1) = 0.1;
  CHECK_FALSE(p.satisfies_loading_constraint());
  CHECK_THROWS_AS(p.validate(), DomainError);
  p.Lambda(0, 1) = 0.0;
  p.Lambda(1, 1) = -0.2;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p.Lambda(1, 1) = 0.2;
  p.sigma2_eps = 0.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p.sigma2_eps = 1.0;
  p.phi = -1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("PresenceData validation") {
  PresenceData d;
  d.Y = (BinaryMatrix(2, 2) << 1, 0, 0, 1).finished();
  d.X = MatrixXd::Ones(2, 1);
  d.coords = (Coords(2, 2) << 0, 0, 1, 1).finished();
  d.species_names = {"a", "b"};
  d.site_ids = {"s1", "s2"};
  CHECK_NOTHROW(d.validate());
  d.coords(1, 0) = 0;
  d.coords(1, 1) = 0;
  CHECK_THROWS_AS(d.validate(), DomainError);
  d.coords(1, 1) = 2;
  d.Y(0, 0) = 2;
  CHECK_THROWS_AS(d.validate(), DomainError);
  d.Y(0, 0) = 1;
  d.species_names.pop_back();
  CHECK_THROWS_AS(d.validate(), StructuralError);
}

TEST_CASE("exponential covariance") {
  CHECK(exp_covariance(0.0, 3.7) == 1.0);
  CHECK(exp_covariance(std::log(2.0) / 1.3, 1.3) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(exp_covariance(0.2, 1.0) > exp_covariance(0.3, 1.0));
  CHECK_THROWS_AS(exp_covariance(-0.1, 1.0), DomainError);
  CHECK_THROWS_AS(exp_covariance(0.1, 0.0), DomainError);

  const Coords s = (Coords(5, 2) << 0, 0, 0.3, 0.1, 0.9, 0.4, 0.2, 0.8, 0.55, 0.55).finished();
  const MatrixXd C = exp_covariance_matrix(s, s, 2.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  CHECK(C(1, 3) == doctest::Approx(std::exp(-2.0 * std::hypot(0.1, 0.7))).epsilon(1e-15));
}

TEST_CASE("default decay gives correlation 0.05 at half the largest distance") {
  const Coords s = (Coords(3, 2) << 0, 0, 3, 4, 1, 1).finished();
  CHECK(max_pairwise_distance(s) == doctest::Approx(5.0));
  const double phi = default_phi(s);
  CHECK(exp_covariance(2.5, phi) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK_THROWS_AS(default_phi(Coords(1, 2)), DomainError);
}

TEST_CASE("jittered Cholesky and GP spectrum") {
  MatrixXd C = MatrixXd::Ones(3, 3);  // rank one: needs jitter
  const JitteredCholesky jc = cholesky_with_jitter(C);
  CHECK(jc.jitter > 0.0);
  CHECK(jc.llt.info() == Eigen::Success);
  CHECK_THROWS_AS(cholesky_with_jitter(-MatrixXd::Identity(2, 2)), NumericalError);

  const Coords s = (Coords(4, 2) << 0, 0, 1, 0, 0, 1, 1, 1).finished();
  const GpSpectrum g = GpSpectrum::build(s, 1.5);
  const MatrixXd K = exp_covariance_matrix(s, s, 1.5);
  CHECK(((g.U * g.d.asDiagonal() * g.U.transpose()) - K).cwiseAbs().maxCoeff() <= 1e-12);
  const VectorXd w = (VectorXd(4) << 0.3, -0.1, 0.8, 0.2).finished();
  const double direct = -0.5 * (std::log(K.determinant()) + w.dot(K.ldlt().solve(w)));
  CHECK(g.log_density(w) == doctest::Approx(direct).epsilon(1e-12));
}
