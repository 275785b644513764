#include "jsdm/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "jsdm/errors.hpp"
#include "jsdm/parallel.hpp"
#include "jsdm/prob_core.hpp"
#include "jsdm/rng.hpp"

namespace jsdm::kernels {
namespace {

void check_latent_shapes(const MatrixXd& Z, const MatrixXd& eta, const BinaryMatrix& Y) {
  if (Z.rows() != Y.rows() || Z.cols() != Y.cols() || eta.rows() != Y.rows() || eta.cols() != Y.cols())
    throw StructuralError("latent, predictor and presence matrices differ in shape");
}

void update_latent_column(MatrixXd& Z, const MatrixXd& eta, const BinaryMatrix& Y, double sd, std::uint64_t seed,
                          std::uint64_t iteration, Index j) {
  Rng rng(stream_seed(seed, iteration, static_cast<std::uint64_t>(j)));
  for (Index i = 0; i < Z.rows(); ++i) {
    Z(i, j) = Y(i, j) ? sample_truncated_normal(eta(i, j), sd, 0.0, kInf, rng)
                      : sample_truncated_normal(eta(i, j), sd, -kInf, 0.0, rng);
  }
}

CellCounts mc_chunk(const BvnParams& p, std::uint64_t n, std::uint64_t seed, std::uint64_t chunk) {
  Rng rng(stream_seed(seed, chunk));
  std::normal_distribution<double> normal;
  const double s = std::sqrt((1.0 - p.rho) * (1.0 + p.rho));
  CellCounts c;
  for (std::uint64_t t = 0; t < n; ++t) {
    const double x1 = normal(rng);
    const double x2 = p.rho * x1 + s * normal(rng);
    const bool y1 = p.mu1 + x1 >= 0.0;
    const bool y2 = p.mu2 + x2 >= 0.0;
    if (y1) {
      y2 ? ++c.n11 : ++c.n10;
    } else {
      y2 ? ++c.n01 : ++c.n00;
    }
  }
  return c;
}

void add(CellCounts& into, const CellCounts& c) {
  into.n00 += c.n00;
  into.n01 += c.n01;
  into.n10 += c.n10;
  into.n11 += c.n11;
}

void evaluate_node(const PairDrawCoefficients& coef, const MatrixXd& design, Index node, PairSurfaceValues& out) {
  const VectorXd x = design.row(node).transpose();
  for (Index d = 0; d < coef.draws(); ++d) {
    const BvnParams bp{coef.b1.row(d).dot(x) / coef.sd1(d), coef.b2.row(d).dot(x) / coef.sd2(d), coef.rho(d)};
    out.ln_theta(node, d) = log_odds_from_bvn(bp);
    const PairTable t = cell_probs(bp);
    out.p11(node, d) = t.p11;
    out.p00(node, d) = t.p00;
  }
}

PairSurfaceValues allocate(const PairDrawCoefficients& coef, const MatrixXd& design,
                           const std::vector<std::uint8_t>& mask) {
  if (static_cast<Index>(mask.size()) != design.rows()) throw StructuralError("mask length differs from node count");
  if (coef.b1.cols() != design.cols()) throw StructuralError("node design width differs from B");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {MatrixXd::Constant(design.rows(), coef.draws(), nan), MatrixXd::Constant(design.rows(), coef.draws(), nan),
          MatrixXd::Constant(design.rows(), coef.draws(), nan)};
}

}  // namespace

PairTable CellCounts::frequencies() const {
  const double n = static_cast<double>(total());
  return {n00 / n, n01 / n, n10 / n, n11 / n};
}

void update_latent_serial(MatrixXd& Z, const MatrixXd& eta, const BinaryMatrix& Y, double sd, std::uint64_t seed,
                          std::uint64_t iteration) {
  check_latent_shapes(Z, eta, Y);
  for (Index j = 0; j < Z.cols(); ++j) update_latent_column(Z, eta, Y, sd, seed, iteration, j);
}

void update_latent_omp(MatrixXd& Z, const MatrixXd& eta, const BinaryMatrix& Y, double sd, std::uint64_t seed,
                       std::uint64_t iteration) {
  check_latent_shapes(Z, eta, Y);
  const Index S = Z.cols();
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (S * Z.rows() > 4096)
  for (Index j = 0; j < S; ++j) update_latent_column(Z, eta, Y, sd, seed, iteration, j);
}

CellCounts mc_cell_counts_serial(const BvnParams& params, std::uint64_t draws, std::uint64_t seed) {
  params.validate();
  CellCounts total;
  const std::uint64_t chunks = (draws + kMcChunk - 1) / kMcChunk;
  for (std::uint64_t c = 0; c < chunks; ++c) {
    add(total, mc_chunk(params, std::min(kMcChunk, draws - c * kMcChunk), seed, c));
  }
  return total;
}

CellCounts mc_cell_counts_omp(const BvnParams& params, std::uint64_t draws, std::uint64_t seed) {
  params.validate();
  const std::int64_t chunks = static_cast<std::int64_t>((draws + kMcChunk - 1) / kMcChunk);
  std::vector<CellCounts> parts(chunks);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
  for (std::int64_t c = 0; c < chunks; ++c) {
    const auto uc = static_cast<std::uint64_t>(c);
    parts[c] = mc_chunk(params, std::min(kMcChunk, draws - uc * kMcChunk), seed, uc);
  }
  CellCounts total;
  for (const auto& p : parts) add(total, p);
  return total;
}

PairSurfaceValues evaluate_pair_serial(const PairDrawCoefficients& coef, const MatrixXd& node_design,
                                       const std::vector<std::uint8_t>& mask) {
  PairSurfaceValues out = allocate(coef, node_design, mask);
  for (Index n = 0; n < node_design.rows(); ++n) {
    if (!mask[n]) evaluate_node(coef, node_design, n, out);
  }
  return out;
}

PairSurfaceValues evaluate_pair_omp(const PairDrawCoefficients& coef, const MatrixXd& node_design,
                                    const std::vector<std::uint8_t>& mask) {
  PairSurfaceValues out = allocate(coef, node_design, mask);
  const Index nodes = node_design.rows();
#pragma omp parallel for schedule(dynamic, 4) num_threads(worker_count())
  for (Index n = 0; n < nodes; ++n) {
    if (!mask[n]) evaluate_node(coef, node_design, n, out);
  }
  return out;
}

}  // namespace jsdm::kernels
