#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "jsdm/kernels.hpp"
#include "jsdm/parallel.hpp"
#include "jsdm/prob_core.hpp"

using namespace jsdm;

namespace {

struct WorkerScope {
  explicit WorkerScope(int n) { set_worker_count(n); }
  ~WorkerScope() { set_worker_count(0); }
};

bool bitwise_equal(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index k = 0; k < a.size(); ++k) {
    const double x = a.data()[k], y = b.data()[k];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("worker count honours the environment cap") {
  setenv("JSDM_ODDS_THREADS", "3", 1);
  set_worker_count(0);
  CHECK(worker_count() <= 3);
  CHECK(worker_count() >= 1);
  setenv("JSDM_ODDS_THREADS", "1", 1);
  set_worker_count(0);
  CHECK(worker_count() == 1);
  unsetenv("JSDM_ODDS_THREADS");
  set_worker_count(5);
  CHECK(worker_count() == 5);
  set_worker_count(0);
}

TEST_CASE("latent update: parallel equals serial for any worker count") {
  const Index n = 57, S = 9;
  Rng rng(1);
  MatrixXd eta(n, S);
  BinaryMatrix Y(n, S);
  for (Index j = 0; j < S; ++j) {
    for (Index i = 0; i < n; ++i) {
      eta(i, j) = 3.0 * std_normal_draw(rng);
      Y(i, j) = uniform01(rng) < 0.4;
    }
  }
  MatrixXd ref = MatrixXd::Zero(n, S);
  kernels::update_latent_serial(ref, eta, Y, 1.0, 17, 4);
  for (Index j = 0; j < S; ++j) {
    for (Index i = 0; i < n; ++i) CHECK((ref(i, j) >= 0.0) == (Y(i, j) == 1));
  }
  for (int workers : {1, 2, 3, 8}) {
    WorkerScope scope(workers);
    MatrixXd z = MatrixXd::Zero(n, S);
    kernels::update_latent_omp(z, eta, Y, 1.0, 17, 4);
    CHECK(bitwise_equal(z, ref));
  }
  MatrixXd other = MatrixXd::Zero(n, S);
  kernels::update_latent_serial(other, eta, Y, 1.0, 17, 5);
  CHECK_FALSE(bitwise_equal(other, ref));
}

TEST_CASE("Monte Carlo cell counts: parallel equals serial") {
  const BvnParams p{0.4, -0.3, 0.6};
  const std::uint64_t draws = 3 * kernels::kMcChunk + 123;
  const kernels::CellCounts ref = kernels::mc_cell_counts_serial(p, draws, 9);
  CHECK(ref.total() == draws);
  for (int workers : {1, 4}) {
    WorkerScope scope(workers);
    const kernels::CellCounts c = kernels::mc_cell_counts_omp(p, draws, 9);
    CHECK(c.n00 == ref.n00);
    CHECK(c.n01 == ref.n01);
    CHECK(c.n10 == ref.n10);
    CHECK(c.n11 == ref.n11);
  }
  const PairTable f = ref.frequencies();
  const PairTable t = cell_probs(p);
  const double n = static_cast<double>(draws);
  CHECK(std::abs(f.p11 - t.p11) <= 4 * std::sqrt(t.p11 * (1 - t.p11) / n));
  CHECK(std::abs(f.p00 - t.p00) <= 4 * std::sqrt(t.p00 * (1 - t.p00) / n));
}

TEST_CASE("pair surface evaluation: parallel equals serial and matches direct composition") {
  const Index D = 6, p = 3, nodes = 40;
  Rng rng(11);
  kernels::PairDrawCoefficients coef;
  coef.b1 = MatrixXd(D, p);
  coef.b2 = MatrixXd(D, p);
  coef.sd1 = VectorXd(D);
  coef.sd2 = VectorXd(D);
  coef.rho = VectorXd(D);
  for (Index d = 0; d < D; ++d) {
    for (Index c = 0; c < p; ++c) {
      coef.b1(d, c) = std_normal_draw(rng);
      coef.b2(d, c) = std_normal_draw(rng);
    }
    coef.sd1(d) = 1.0 + uniform01(rng);
    coef.sd2(d) = 1.0 + uniform01(rng);
    coef.rho(d) = 1.8 * uniform01(rng) - 0.9;
  }
  MatrixXd design(nodes, p);
  std::vector<std::uint8_t> mask(nodes, 0);
  for (Index k = 0; k < nodes; ++k) {
    design(k, 0) = 1.0;
    design(k, 1) = std_normal_draw(rng);
    design(k, 2) = 4.0 * std_normal_draw(rng);
    mask[k] = k % 7 == 3;
  }
  const auto ref = kernels::evaluate_pair_serial(coef, design, mask);
  for (int workers : {1, 3}) {
    WorkerScope scope(workers);
    const auto v = kernels::evaluate_pair_omp(coef, design, mask);
    CHECK(bitwise_equal(v.ln_theta, ref.ln_theta));
    CHECK(bitwise_equal(v.p11, ref.p11));
    CHECK(bitwise_equal(v.p00, ref.p00));
  }
  for (Index k = 0; k < nodes; ++k) {
    for (Index d = 0; d < D; ++d) {
      if (mask[k]) {
        CHECK(std::isnan(ref.ln_theta(k, d)));
        continue;
      }
      const BvnParams bp{design.row(k).dot(coef.b1.row(d)) / coef.sd1(d), design.row(k).dot(coef.b2.row(d)) / coef.sd2(d),
                         coef.rho(d)};
      CHECK(ref.ln_theta(k, d) == doctest::Approx(log_odds_from_bvn(bp)).epsilon(1e-13));
      CHECK(ref.p11(k, d) == doctest::Approx(cell_probs(bp).p11).epsilon(1e-13));
      CHECK((ref.ln_theta(k, d) > 0) == (coef.rho(d) > 0));
    }
  }
}
