#include <benchmark/benchmark.h>

#include <random>

#include "jsdm/kernels.hpp"
#include "jsdm/parallel.hpp"
#include "jsdm/rng.hpp"

namespace {

using namespace jsdm;

struct LatentInputs {
  MatrixXd Z, eta;
  BinaryMatrix Y;
};

LatentInputs latent_inputs(Index n, Index S) {
  Rng rng(7);
  std::normal_distribution<double> normal;
  LatentInputs in{MatrixXd::Zero(n, S), MatrixXd(n, S), BinaryMatrix(n, S)};
  for (Index j = 0; j < S; ++j) {
    for (Index i = 0; i < n; ++i) {
      in.eta(i, j) = normal(rng);
      in.Y(i, j) = uniform01(rng) < 0.3 ? 1 : 0;
    }
  }
  return in;
}

template <bool Parallel>
void BM_UpdateLatent(benchmark::State& state) {
  const Index n = state.range(0), S = 64;
  LatentInputs in = latent_inputs(n, S);
  std::uint64_t t = 0;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::update_latent_omp(in.Z, in.eta, in.Y, 1.0, 11, ++t);
    } else {
      kernels::update_latent_serial(in.Z, in.eta, in.Y, 1.0, 11, ++t);
    }
    benchmark::DoNotOptimize(in.Z.data());
  }
  state.SetItemsProcessed(state.iterations() * n * S);
}

template <bool Parallel>
void BM_McCellCounts(benchmark::State& state) {
  const BvnParams params{0.3, -0.2, 0.5};
  const auto draws = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    const auto counts = Parallel ? kernels::mc_cell_counts_omp(params, draws, 3) : kernels::mc_cell_counts_serial(params, draws, 3);
    benchmark::DoNotOptimize(counts.n11);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(draws));
}

kernels::PairDrawCoefficients pair_coefficients(Index D, Index p) {
  Rng rng(5);
  std::normal_distribution<double> normal;
  kernels::PairDrawCoefficients c;
  c.b1 = MatrixXd(D, p);
  c.b2 = MatrixXd(D, p);
  c.sd1 = VectorXd(D);
  c.sd2 = VectorXd(D);
  c.rho = VectorXd(D);
  for (Index d = 0; d < D; ++d) {
    for (Index k = 0; k < p; ++k) {
      c.b1(d, k) = normal(rng);
      c.b2(d, k) = normal(rng);
    }
    c.sd1(d) = 1.0 + uniform01(rng);
    c.sd2(d) = 1.0 + uniform01(rng);
    c.rho(d) = 2.0 * uniform01(rng) - 1.0;
  }
  return c;
}

template <bool Parallel>
void BM_EvaluatePair(benchmark::State& state) {
  const Index nodes = state.range(0), D = 200, p = 3;
  const auto coef = pair_coefficients(D, p);
  Rng rng(9);
  std::normal_distribution<double> normal;
  MatrixXd design(nodes, p);
  for (Index k = 0; k < nodes; ++k) {
    design(k, 0) = 1.0;
    for (Index c = 1; c < p; ++c) design(k, c) = normal(rng);
  }
  const std::vector<std::uint8_t> mask(nodes, 0);
  for (auto _ : state) {
    const auto v = Parallel ? kernels::evaluate_pair_omp(coef, design, mask) : kernels::evaluate_pair_serial(coef, design, mask);
    benchmark::DoNotOptimize(v.ln_theta.data());
  }
  state.SetItemsProcessed(state.iterations() * nodes * D);
}

BENCHMARK(BM_UpdateLatent<false>)->Arg(200)->Arg(2000);
BENCHMARK(BM_UpdateLatent<true>)->Arg(200)->Arg(2000);
BENCHMARK(BM_McCellCounts<false>)->Arg(1 << 20);
BENCHMARK(BM_McCellCounts<true>)->Arg(1 << 20);
BENCHMARK(BM_EvaluatePair<false>)->Arg(400)->Arg(1600);
BENCHMARK(BM_EvaluatePair<true>)->Arg(400)->Arg(1600);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::AddCustomContext("workers", std::to_string(jsdm::worker_count()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
