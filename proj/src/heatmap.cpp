#include "jsdm/heatmap.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <stdexcept>

#include "jsdm/errors.hpp"

namespace jsdm {
namespace {

using Stop = std::array<double, 4>;  // position, r, g, b

// Diverging blue-white-red and a light-yellow to dark-green ramp.
constexpr std::array<Stop, 5> kDiverging{{{0.0, 33, 102, 172}, {0.25, 146, 197, 222}, {0.5, 247, 247, 247},
                                          {0.75, 244, 165, 130}, {1.0, 178, 24, 43}}};
constexpr std::array<Stop, 5> kSequential{{{0.0, 255, 255, 229}, {0.25, 217, 240, 163}, {0.5, 120, 198, 121},
                                           {0.75, 35, 132, 67}, {1.0, 0, 69, 41}}};
constexpr Rgb kMasked{160, 160, 160};

template <std::size_t N>
Rgb interpolate(const std::array<Stop, N>& stops, double t) {
  t = std::clamp(t, 0.0, 1.0);
  std::size_t i = 1;
  while (i + 1 < N && stops[i][0] < t) ++i;
  const Stop& a = stops[i - 1];
  const Stop& b = stops[i];
  const double u = (t - a[0]) / (b[0] - a[0]);
  auto channel = [&](int c) { return static_cast<std::uint8_t>(std::lround(a[c] + u * (b[c] - a[c]))); };
  return {channel(1), channel(2), channel(3)};
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

Rgb scale_color(ColorScale scale, double t) {
  return scale == ColorScale::diverging ? interpolate(kDiverging, t) : interpolate(kSequential, t);
}

void write_heatmap_png(const std::filesystem::path& path, const Eigen::VectorXd& values,
                       const std::vector<std::uint8_t>& mask, const HeatmapSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1 || values.size() != spec.nx * spec.ny) {
    throw StructuralError("heatmap values do not match the grid shape");
  }
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != values.size()) {
    throw StructuralError("heatmap mask does not match the grid shape");
  }
  if (spec.cell_pixels < 1) throw DomainError("cell_pixels must be positive");
  auto usable = [&](Eigen::Index k) { return (mask.empty() || !mask[k]) && std::isfinite(values(k)); };

  double lo = spec.lo, hi = spec.hi;
  if (spec.scale == ColorScale::diverging) {
    double limit = spec.limit;
    if (!(limit > 0.0)) {
      limit = 0.0;
      for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (usable(k)) limit = std::max(limit, std::abs(values(k)));
      }
      if (limit == 0.0) limit = 1.0;
    }
    lo = -limit;
    hi = limit;
  } else if (!(lo < hi)) {
    lo = std::numeric_limits<double>::infinity();
    hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      if (!usable(k)) continue;
      lo = std::min(lo, values(k));
      hi = std::max(hi, values(k));
    }
    if (!(lo < hi)) {
      lo = std::isfinite(lo) ? lo - 0.5 : 0.0;
      hi = lo + 1.0;
    }
  }

  const int px = spec.cell_pixels;
  const auto width = static_cast<png_uint_32>(spec.nx * px);
  const auto height = static_cast<png_uint_32>(spec.ny * px);
  std::vector<png_byte> image(static_cast<std::size_t>(width) * height * 3);
  for (Eigen::Index iy = 0; iy < spec.ny; ++iy) {
    for (Eigen::Index ix = 0; ix < spec.nx; ++ix) {
      const Eigen::Index k = iy * spec.nx + ix;
      const Rgb c = usable(k) ? scale_color(spec.scale, (values(k) - lo) / (hi - lo)) : kMasked;
      const Eigen::Index row0 = (spec.ny - 1 - iy) * px;
      for (int dy = 0; dy < px; ++dy) {
        png_byte* row = image.data() + (static_cast<std::size_t>(row0 + dy) * width + ix * px) * 3;
        for (int dx = 0; dx < px; ++dx) {
          row[3 * dx] = c.r;
          row[3 * dx + 1] = c.g;
          row[3 * dx + 2] = c.b;
        }
      }
    }
  }

  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (png_uint_32 y = 0; y < height; ++y) png_write_row(png, image.data() + static_cast<std::size_t>(y) * width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace jsdm
