#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// version; both partition random streams identically, so outputs match bit for bit
// for any worker count.

#include <cstdint>
#include <vector>

#include "jsdm/model.hpp"
#include "jsdm/tables.hpp"

namespace jsdm::kernels {

/// Z(i, j) <- N(eta(i, j), sd^2) truncated to [0, inf) when Y(i, j) = 1, (-inf, 0) otherwise.
/// Column j draws from stream_seed(seed, iteration, j).
void update_latent_serial(MatrixXd& Z, const MatrixXd& eta, const BinaryMatrix& Y, double sd, std::uint64_t seed,
                          std::uint64_t iteration);
void update_latent_omp(MatrixXd& Z, const MatrixXd& eta, const BinaryMatrix& Y, double sd, std::uint64_t seed,
                       std::uint64_t iteration);

struct CellCounts {
  std::uint64_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;
  std::uint64_t total() const { return n00 + n01 + n10 + n11; }
  PairTable frequencies() const;
};

inline constexpr std::uint64_t kMcChunk = 1 << 16;

/// Thresholds `draws` simulated latent pairs at 0. Chunk c of kMcChunk draws uses stream_seed(seed, c).
CellCounts mc_cell_counts_serial(const BvnParams& params, std::uint64_t draws, std::uint64_t seed);
CellCounts mc_cell_counts_omp(const BvnParams& params, std::uint64_t draws, std::uint64_t seed);

/// Per-draw coefficients of one species pair in marginal mode.
struct PairDrawCoefficients {
  MatrixXd b1, b2;      // D x p rows of B for the two species
  VectorXd sd1, sd2;    // sqrt(Sigma*_jj) per draw
  VectorXd rho;         // H_jj' per draw
  Index draws() const { return b1.rows(); }
};

/// Node x draw matrices. Masked nodes hold NaN.
struct PairSurfaceValues {
  MatrixXd ln_theta;
  MatrixXd p11;
  MatrixXd p00;
};

PairSurfaceValues evaluate_pair_serial(const PairDrawCoefficients& coef, const MatrixXd& node_design,
                                       const std::vector<std::uint8_t>& mask);
PairSurfaceValues evaluate_pair_omp(const PairDrawCoefficients& coef, const MatrixXd& node_design,
                                    const std::vector<std::uint8_t>& mask);

}  // namespace jsdm::kernels
