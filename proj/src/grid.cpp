#include "jsdm/grid.hpp"

#include <cmath>

#include "jsdm/errors.hpp"

namespace jsdm {

void GridSpec::validate() const {
  if (nx < 2 || ny < 2) throw DomainError("grid resolution must be at least 2 per axis");
  if (!(xmax > xmin) || !(ymax > ymin)) throw DomainError("grid extent must be non-empty");
}

Coords GridSpec::nodes() const {
  validate();
  Coords out(size(), 2);
  for (Index iy = 0; iy < ny; ++iy) {
    for (Index ix = 0; ix < nx; ++ix) {
      out(iy * nx + ix, 0) = xmin + (xmax - xmin) * static_cast<double>(ix) / static_cast<double>(nx - 1);
      out(iy * nx + ix, 1) = ymin + (ymax - ymin) * static_cast<double>(iy) / static_cast<double>(ny - 1);
    }
  }
  return out;
}

GridSpec GridSpec::covering(const Coords& points, Index nx, Index ny, double pad) {
  if (points.rows() == 0) throw StructuralError("cannot cover an empty point set");
  GridSpec g;
  g.nx = nx;
  g.ny = ny;
  g.xmin = points.col(0).minCoeff() - pad;
  g.xmax = points.col(0).maxCoeff() + pad;
  g.ymin = points.col(1).minCoeff() - pad;
  g.ymax = points.col(1).maxCoeff() + pad;
  g.validate();
  return g;
}

PredictionGrid build_prediction_grid(const GridSpec& spec, const CovariateRaster& raster,
                                     const CovariateScaling& scaling) {
  if (raster.coords.rows() != raster.values.rows()) throw StructuralError("raster coords and values differ in length");
  if (raster.values.cols() != scaling.mean.size()) throw StructuralError("raster covariate count differs from the fit");
  if (raster.coords.rows() == 0) throw StructuralError("raster is empty");
  PredictionGrid g;
  g.spec = spec;
  g.nodes = spec.nodes();
  g.design = MatrixXd::Zero(g.nodes.rows(), scaling.mean.size() + 1);
  g.mask.assign(g.nodes.rows(), 0);
  for (Index k = 0; k < g.nodes.rows(); ++k) {
    Index best = 0;
    const double dist = std::sqrt((raster.coords.rowwise() - g.nodes.row(k)).rowwise().squaredNorm().minCoeff(&best));
    const VectorXd raw = raster.values.row(best).transpose();
    if (dist > raster.max_distance || !raw.allFinite()) {
      g.mask[k] = 1;
      continue;
    }
    g.design.row(k) = scaling.design_row(raw).transpose();
  }
  return g;
}

PredictionGrid constant_prediction_grid(const GridSpec& spec, const VectorXd& design_row) {
  PredictionGrid g;
  g.spec = spec;
  g.nodes = spec.nodes();
  g.design = design_row.transpose().replicate(g.nodes.rows(), 1);
  g.mask.assign(g.nodes.rows(), 0);
  return g;
}

}  // namespace jsdm
