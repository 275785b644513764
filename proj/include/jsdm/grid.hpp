#pragma once

#include <cstdint>
#include <vector>

#include "jsdm/model.hpp"

namespace jsdm {

/// Regular nx x ny lattice over [xmin, xmax] x [ymin, ymax]; node k = iy * nx + ix.
struct GridSpec {
  Index nx = 2, ny = 2;
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

  void validate() const;
  Index size() const { return nx * ny; }
  Coords nodes() const;
  /// Bounding box of the points, expanded by `pad` on each side.
  static GridSpec covering(const Coords& points, Index nx, Index ny, double pad = 0.0);
};

/// Raw (unstandardized) covariates at scattered points. NaN marks a missing value.
struct CovariateRaster {
  Coords coords;
  MatrixXd values;  // m x q
  /// Nodes farther than this from every raster point are masked.
  double max_distance = kInf;
};

/// Grid nodes with their design rows; mask[k] != 0 marks out-of-domain nodes.
struct PredictionGrid {
  GridSpec spec;
  Coords nodes;
  MatrixXd design;  // nodes x p, standardized with the fit's scaling, intercept first
  std::vector<std::uint8_t> mask;
};

/// Nearest-neighbor covariate lookup; nodes whose nearest raster point is missing a
/// value or lies beyond max_distance are masked, never imputed.
PredictionGrid build_prediction_grid(const GridSpec& spec, const CovariateRaster& raster, const CovariateScaling& scaling);

/// Grid whose every node carries the same design row.
PredictionGrid constant_prediction_grid(const GridSpec& spec, const VectorXd& design_row);

/// Per-node posterior summaries of one species pair.
struct SurfaceGrid {
  Coords nodes;
  std::vector<std::uint8_t> mask;
  VectorXd mean_log10_theta;
  VectorXd q05, q95;
  VectorXd p_exceed;  // P(theta > 1 | data), strict inequality
  VectorXd p11_mean;
  VectorXd p00_mean;
  /// Optional nodes x draws matrix of natural-log theta (empty unless requested).
  MatrixXd ln_theta_draws;

  Index size() const { return nodes.rows(); }
};

}  // namespace jsdm
