#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace jsdm {

enum class ColorScale {
  diverging,  // symmetric about 0: blue < 0 < red, white at 0
  sequential  // light to dark over [lo, hi]
};

struct HeatmapSpec {
  Eigen::Index nx = 0, ny = 0;  // node k = iy * nx + ix; row iy = 0 is drawn at the bottom
  ColorScale scale = ColorScale::diverging;
  /// Diverging: the scale spans [-limit, limit]; <= 0 picks max |value|.
  /// Sequential: [lo, hi]; lo >= hi picks the data range.
  double limit = 0.0;
  double lo = 0.0, hi = 0.0;
  int cell_pixels = 8;
};

/// RGB PNG of a grid of values; masked or NaN nodes are drawn grey.
void write_heatmap_png(const std::filesystem::path& path, const Eigen::VectorXd& values,
                       const std::vector<std::uint8_t>& mask, const HeatmapSpec& spec);

struct Rgb {
  std::uint8_t r, g, b;
};
/// Color of t in [0, 1] on the given scale (t = 0.5 is the diverging midpoint).
Rgb scale_color(ColorScale scale, double t);

}  // namespace jsdm
