#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "jsdm/grid.hpp"
#include "jsdm/model.hpp"
#include "jsdm/ordinal.hpp"
#include "jsdm/sampler.hpp"

namespace jsdm {

namespace fs = std::filesystem;

/// Comma-separated file with a header row. No quoting; fields are trimmed.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const fs::path& path);

/// %.17g, with NaN as "NA" and +-inf as the tagged tokens "extreme_pos" / "extreme_neg".
std::string format_number(double v);
/// Inverse of format_number; an empty field also reads as NaN. Throws DomainError on anything else.
double parse_number(const std::string& field);

struct IngestReport {
  Index n = 0;
  Index S = 0;
  Index presences = 0;
  double presence_rate() const { return n * S > 0 ? static_cast<double>(presences) / static_cast<double>(n * S) : 0.0; }
  /// "n=..., S=..., presences=..., presence rate=1.65%"
  std::string summary() const;
};

struct Ingested {
  PresenceData data;
  IngestReport report;
};

/// sites CSV: site_id, x, y, covariates...; species CSV: site_id then one 0/1 column per species.
/// Covariates are standardized (mean 0, sample sd 1) and an intercept column is prepended.
/// Errors carry 1-based file row (header = row 1) and column.
Ingested ingest(const fs::path& sites_csv, const fs::path& species_csv);

/// Writes sites.csv (raw covariates = X without intercept, unscaled back when scaling is set)
/// and species.csv in the ingest schema.
void write_presence_data(const PresenceData& data, const fs::path& dir);

/// Raster CSV: x, y, covariates... ("NA" or empty for missing).
CovariateRaster read_raster(const fs::path& path);
void write_raster(const Coords& coords, const MatrixXd& values, const std::vector<std::string>& names,
                  const fs::path& path);

/// Directory of per-parameter CSVs (B, Lambda, W, H, phi, trace, sites) plus draws.json.
void write_draws(const PosteriorDraws& draws, const fs::path& dir);
PosteriorDraws read_draws(const fs::path& dir);

/// Long-format surface CSV: x,y,mean_log10_theta,q05,q95,p_exceed,p11_mean,p00_mean.
void write_surface_csv(const SurfaceGrid& surface, const fs::path& path);

/// Ordinal table CSV: first line "K,<K>", then K rows of K probabilities (row-major).
OrdinalTable read_ordinal_table(const fs::path& path);
void write_ordinal_table(const OrdinalTable& table, const fs::path& path);

/// Equirectangular projection of (lon, lat) degrees to planar km about the mean latitude.
Coords project_equirectangular(const Coords& lonlat);

/// Whole-file contents (used for hashing and byte comparisons).
std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& contents);

}  // namespace jsdm
