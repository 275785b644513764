#include "jsdm/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "jsdm/errors.hpp"
#include "jsdm/json_util.hpp"

namespace jsdm {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_field(const CsvTable&, const std::string& field, const std::string& file, std::size_t row, std::size_t col) {
  try {
    return parse_number(field);
  } catch (const DomainError&) {
    throw IngestError(file, row, col, "not a number: '" + field + "'");
  }
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : path_(path) {}
  ~CsvWriter() = default;

  CsvWriter& field(const std::string& s) {
    if (!first_) buf_ += ',';
    buf_ += s;
    first_ = false;
    return *this;
  }
  CsvWriter& number(double v) { return field(format_number(v)); }
  CsvWriter& integer(long long v) { return field(std::to_string(v)); }
  void end_row() {
    buf_ += '\n';
    first_ = true;
  }
  void close() { write_file(path_, buf_); }

 private:
  fs::path path_;
  std::string buf_;
  bool first_ = true;
};

void require_header(const CsvTable& t, const std::string& file, std::size_t min_cols) {
  if (t.header.size() < min_cols) throw IngestError(file, 1, 0, "header has too few columns");
}

MatrixXd read_wide(const fs::path& path, Index key_cols, Index D, Index rows_per_draw, Index cols) {
  const CsvTable t = read_csv(path);
  const std::string file = path.string();
  if (static_cast<Index>(t.header.size()) != key_cols + cols) throw IngestError(file, 1, 0, "unexpected column count");
  if (static_cast<Index>(t.rows.size()) != D * rows_per_draw) throw IngestError(file, 0, 0, "unexpected row count");
  MatrixXd m(D * rows_per_draw, cols);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (static_cast<Index>(t.rows[r].size()) != key_cols + cols) throw IngestError(file, r + 2, 0, "ragged row");
    for (Index c = 0; c < cols; ++c) m(r, c) = parse_field(t, t.rows[r][key_cols + c], file, r + 2, key_cols + c + 1);
  }
  return m;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(path.string(), 0, 0, "cannot open file");
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (!have_header) {
      t.header = split(line);
      have_header = true;
    } else {
      t.rows.push_back(split(line));
    }
  }
  if (!have_header) throw IngestError(path.string(), 0, 0, "file is empty");
  return t;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (v == std::numeric_limits<double>::infinity()) return "extreme_pos";
  if (v == -std::numeric_limits<double>::infinity()) return "extreme_neg";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& field) {
  if (field == "NA" || field.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (field == "extreme_pos") return std::numeric_limits<double>::infinity();
  if (field == "extreme_neg") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) throw DomainError("not a number: '" + field + "'");
  return v;
}

std::string IngestReport::summary() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "n=%ld, S=%ld, presences=%ld, presence rate=%.2f%%", static_cast<long>(n),
                static_cast<long>(S), static_cast<long>(presences), 100.0 * presence_rate());
  return buf;
}

Ingested ingest(const fs::path& sites_csv, const fs::path& species_csv) {
  const std::string sf = sites_csv.string(), pf = species_csv.string();
  const CsvTable sites = read_csv(sites_csv);
  const CsvTable species = read_csv(species_csv);
  require_header(sites, sf, 3);
  require_header(species, pf, 2);
  if (sites.header[0] != "site_id" || sites.header[1] != "x" || sites.header[2] != "y")
    throw IngestError(sf, 1, 0, "sites header must start with site_id,x,y");
  if (species.header[0] != "site_id") throw IngestError(pf, 1, 1, "species header must start with site_id");

  const Index n = static_cast<Index>(sites.rows.size());
  const Index q = static_cast<Index>(sites.header.size()) - 3;
  const Index S = static_cast<Index>(species.header.size()) - 1;
  if (n == 0) throw IngestError(sf, 0, 0, "no sites");
  if (S == 0) throw IngestError(pf, 1, 0, "no species columns");

  Ingested out;
  PresenceData& d = out.data;
  d.coords.resize(n, 2);
  MatrixXd raw(n, q);
  std::map<std::string, Index> index;
  std::map<std::pair<double, double>, std::size_t> seen_xy;
  for (Index i = 0; i < n; ++i) {
    const auto& row = sites.rows[i];
    const std::size_t file_row = i + 2;
    if (static_cast<Index>(row.size()) != q + 3) throw IngestError(sf, file_row, 0, "wrong number of fields");
    if (!index.emplace(row[0], i).second) throw IngestError(sf, file_row, 1, "duplicate site_id '" + row[0] + "'");
    d.site_ids.push_back(row[0]);
    for (int c = 0; c < 2; ++c) {
      d.coords(i, c) = parse_field(sites, row[1 + c], sf, file_row, 2 + c);
      if (std::isnan(d.coords(i, c))) throw IngestError(sf, file_row, 2 + c, "missing coordinate");
    }
    const auto xy = std::make_pair(d.coords(i, 0), d.coords(i, 1));
    if (auto [it, fresh] = seen_xy.emplace(xy, file_row); !fresh)
      throw IngestError(sf, file_row, 2, "duplicate coordinates (also on row " + std::to_string(it->second) + ")");
    for (Index c = 0; c < q; ++c) {
      raw(i, c) = parse_field(sites, row[3 + c], sf, file_row, 4 + c);
      if (std::isnan(raw(i, c))) throw IngestError(sf, file_row, 4 + c, "missing covariate");
    }
  }

  d.scaling.names.assign(sites.header.begin() + 3, sites.header.end());
  d.scaling.mean = raw.colwise().mean().transpose();
  d.scaling.sd.resize(q);
  for (Index c = 0; c < q; ++c) {
    const double ss = (raw.col(c).array() - d.scaling.mean(c)).square().sum();
    d.scaling.sd(c) = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    if (!(d.scaling.sd(c) > 0.0)) throw IngestError(sf, 0, 4 + c, "covariate '" + d.scaling.names[c] + "' is constant");
  }
  d.X.resize(n, q + 1);
  d.X.col(0).setOnes();
  for (Index c = 0; c < q; ++c) d.X.col(c + 1) = (raw.col(c).array() - d.scaling.mean(c)) / d.scaling.sd(c);

  d.species_names.assign(species.header.begin() + 1, species.header.end());
  d.Y = BinaryMatrix::Zero(n, S);
  std::vector<bool> filled(n, false);
  for (std::size_t r = 0; r < species.rows.size(); ++r) {
    const auto& row = species.rows[r];
    const std::size_t file_row = r + 2;
    if (static_cast<Index>(row.size()) != S + 1) throw IngestError(pf, file_row, 0, "wrong number of fields");
    const auto it = index.find(row[0]);
    if (it == index.end()) throw IngestError(pf, file_row, 1, "site_id '" + row[0] + "' not in sites file");
    if (filled[it->second]) throw IngestError(pf, file_row, 1, "duplicate site_id '" + row[0] + "'");
    filled[it->second] = true;
    for (Index j = 0; j < S; ++j) {
      const std::string& v = row[j + 1];
      if (v != "0" && v != "1") throw IngestError(pf, file_row, j + 2, "presence value must be 0 or 1, got '" + v + "'");
      d.Y(it->second, j) = v == "1" ? 1 : 0;
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (!filled[i]) throw IngestError(pf, 0, 1, "site_id '" + d.site_ids[i] + "' has no species row");
  }
  d.validate();
  out.report = {n, S, static_cast<Index>(d.Y.cast<long>().sum())};
  return out;
}

void write_presence_data(const PresenceData& data, const fs::path& dir) {
  fs::create_directories(dir);
  const Index q = data.p() - 1;
  CsvWriter sites(dir / "sites.csv");
  sites.field("site_id").field("x").field("y");
  for (Index c = 0; c < q; ++c) {
    sites.field(c < static_cast<Index>(data.scaling.names.size()) ? data.scaling.names[c] : "cov" + std::to_string(c + 1));
  }
  sites.end_row();
  const bool scaled = data.scaling.mean.size() == q && q > 0;
  for (Index i = 0; i < data.n(); ++i) {
    sites.field(data.site_ids[i]).number(data.coords(i, 0)).number(data.coords(i, 1));
    for (Index c = 0; c < q; ++c) {
      const double v = data.X(i, c + 1);
      sites.number(scaled ? v * data.scaling.sd(c) + data.scaling.mean(c) : v);
    }
    sites.end_row();
  }
  sites.close();

  CsvWriter sp(dir / "species.csv");
  sp.field("site_id");
  for (const auto& name : data.species_names) sp.field(name);
  sp.end_row();
  for (Index i = 0; i < data.n(); ++i) {
    sp.field(data.site_ids[i]);
    for (Index j = 0; j < data.S(); ++j) sp.integer(data.Y(i, j));
    sp.end_row();
  }
  sp.close();
}

CovariateRaster read_raster(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::string file = path.string();
  require_header(t, file, 2);
  if (t.header[0] != "x" || t.header[1] != "y") throw IngestError(file, 1, 0, "raster header must start with x,y");
  const Index m = static_cast<Index>(t.rows.size());
  const Index q = static_cast<Index>(t.header.size()) - 2;
  CovariateRaster r;
  r.coords.resize(m, 2);
  r.values.resize(m, q);
  for (Index i = 0; i < m; ++i) {
    const auto& row = t.rows[i];
    if (static_cast<Index>(row.size()) != q + 2) throw IngestError(file, i + 2, 0, "wrong number of fields");
    for (Index c = 0; c < 2; ++c) r.coords(i, c) = parse_field(t, row[c], file, i + 2, c + 1);
    for (Index c = 0; c < q; ++c) r.values(i, c) = parse_field(t, row[c + 2], file, i + 2, c + 3);
  }
  return r;
}

void write_raster(const Coords& coords, const MatrixXd& values, const std::vector<std::string>& names,
                  const fs::path& path) {
  CsvWriter w(path);
  w.field("x").field("y");
  for (const auto& n : names) w.field(n);
  w.end_row();
  for (Index i = 0; i < coords.rows(); ++i) {
    w.number(coords(i, 0)).number(coords(i, 1));
    for (Index c = 0; c < values.cols(); ++c) w.number(values(i, c));
    w.end_row();
  }
  w.close();
}

void write_draws(const PosteriorDraws& draws, const fs::path& dir) {
  draws.validate();
  fs::create_directories(dir);
  const Index D = draws.size(), S = draws.S(), p = draws.X.cols(), n = draws.X.rows();
  const Index r = D > 0 ? draws.Lambda.front().cols() : draws.config.r;

  CsvWriter sites(dir / "sites.csv");
  sites.field("site_id").field("x").field("y");
  for (Index c = 0; c < p; ++c) sites.field("X" + std::to_string(c));
  sites.end_row();
  for (Index i = 0; i < n; ++i) {
    sites.field(draws.site_ids[i]).number(draws.coords(i, 0)).number(draws.coords(i, 1));
    for (Index c = 0; c < p; ++c) sites.number(draws.X(i, c));
    sites.end_row();
  }
  sites.close();

  auto wide = [&](const char* file, const char* key, const std::vector<MatrixXd>& mats, const std::string& prefix,
                  Index cols, const std::vector<std::string>* labels) {
    CsvWriter w(dir / file);
    w.field("draw").field(key);
    for (Index c = 0; c < cols; ++c) w.field(labels ? (*labels)[c] : prefix + std::to_string(c + 1));
    w.end_row();
    for (Index d = 0; d < D; ++d) {
      for (Index i = 0; i < mats[d].rows(); ++i) {
        w.integer(d).field(key == std::string("site") ? draws.site_ids[i] : draws.species_names[i]);
        for (Index c = 0; c < cols; ++c) w.number(mats[d](i, c));
        w.end_row();
      }
    }
    w.close();
  };
  std::vector<std::string> xnames{"intercept"};
  for (Index c = 1; c < p; ++c) {
    xnames.push_back(c - 1 < static_cast<Index>(draws.scaling.names.size()) ? draws.scaling.names[c - 1]
                                                                              : "X" + std::to_string(c));
  }
  wide("B.csv", "species", draws.B, "", p, &xnames);
  wide("Lambda.csv", "species", draws.Lambda, "f", r, nullptr);
  wide("W.csv", "site", draws.W, "f", r, nullptr);
  wide("H.csv", "species", draws.H, "", S, &draws.species_names);

  CsvWriter phi(dir / "phi.csv");
  phi.field("draw").field("phi").end_row();
  for (Index d = 0; d < D; ++d) {
    phi.integer(d).number(draws.phi[d]);
    phi.end_row();
  }
  phi.close();

  CsvWriter trace(dir / "trace.csv");
  trace.field("iteration").field("log_posterior").end_row();
  for (std::size_t t = 0; t < draws.log_posterior.size(); ++t) {
    trace.integer(static_cast<long long>(t + 1)).number(draws.log_posterior[t]);
    trace.end_row();
  }
  trace.close();

  nlohmann::json manifest = {{"format", "jsdm-posterior-draws"},
                             {"version", 1},
                             {"draws", D},
                             {"n", n},
                             {"S", S},
                             {"p", p},
                             {"r", r},
                             {"config", draws.config.to_json()},
                             {"config_hash", draws.config.hash()},
                             {"species", draws.species_names},
                             {"covariates", draws.scaling.names},
                             {"scaling_mean", std::vector<double>(draws.scaling.mean.data(), draws.scaling.mean.data() + draws.scaling.mean.size())},
                             {"scaling_sd", std::vector<double>(draws.scaling.sd.data(), draws.scaling.sd.data() + draws.scaling.sd.size())},
                             {"warnings", draws.warnings}};
  write_file(dir / "draws.json", manifest.dump(2) + "\n");
}

PosteriorDraws read_draws(const fs::path& dir) {
  if (!fs::exists(dir / "draws.json")) throw IngestError((dir / "draws.json").string(), 0, 0, "missing posterior draws manifest");
  const auto manifest = nlohmann::json::parse(read_file(dir / "draws.json"));
  if (manifest.value("format", "") != "jsdm-posterior-draws") throw StructuralError("not a posterior draws directory");
  PosteriorDraws out;
  const Index D = manifest.at("draws"), n = manifest.at("n"), S = manifest.at("S"), p = manifest.at("p"),
              r = manifest.at("r");
  out.config = ChainConfig::from_json(manifest.at("config"));
  out.species_names = manifest.at("species").get<std::vector<std::string>>();
  out.scaling.names = manifest.at("covariates").get<std::vector<std::string>>();
  const auto mean = manifest.at("scaling_mean").get<std::vector<double>>();
  const auto sd = manifest.at("scaling_sd").get<std::vector<double>>();
  out.scaling.mean = Eigen::Map<const VectorXd>(mean.data(), static_cast<Index>(mean.size()));
  out.scaling.sd = Eigen::Map<const VectorXd>(sd.data(), static_cast<Index>(sd.size()));
  out.warnings = manifest.value("warnings", std::vector<std::string>{});

  const CsvTable sites = read_csv(dir / "sites.csv");
  if (static_cast<Index>(sites.rows.size()) != n) throw StructuralError("sites.csv row count differs from manifest");
  out.coords.resize(n, 2);
  out.X.resize(n, p);
  const std::string sf = (dir / "sites.csv").string();
  for (Index i = 0; i < n; ++i) {
    const auto& row = sites.rows[i];
    if (static_cast<Index>(row.size()) != p + 3) throw IngestError(sf, i + 2, 0, "wrong number of fields");
    out.site_ids.push_back(row[0]);
    out.coords(i, 0) = parse_field(sites, row[1], sf, i + 2, 2);
    out.coords(i, 1) = parse_field(sites, row[2], sf, i + 2, 3);
    for (Index c = 0; c < p; ++c) out.X(i, c) = parse_field(sites, row[3 + c], sf, i + 2, 4 + c);
  }
  const MatrixXd B = read_wide(dir / "B.csv", 2, D, S, p);
  const MatrixXd L = read_wide(dir / "Lambda.csv", 2, D, S, r);
  const MatrixXd W = read_wide(dir / "W.csv", 2, D, n, r);
  const MatrixXd H = read_wide(dir / "H.csv", 2, D, S, S);
  const MatrixXd phi = read_wide(dir / "phi.csv", 1, D, 1, 1);
  for (Index d = 0; d < D; ++d) {
    out.B.push_back(B.middleRows(d * S, S));
    out.Lambda.push_back(L.middleRows(d * S, S));
    out.W.push_back(W.middleRows(d * n, n));
    out.H.push_back(H.middleRows(d * S, S));
    out.phi.push_back(phi(d, 0));
  }
  if (fs::exists(dir / "trace.csv")) {
    const CsvTable trace = read_csv(dir / "trace.csv");
    for (std::size_t t = 0; t < trace.rows.size(); ++t) out.log_posterior.push_back(parse_number(trace.rows[t].at(1)));
  }
  out.validate();
  return out;
}

void write_surface_csv(const SurfaceGrid& s, const fs::path& path) {
  CsvWriter w(path);
  for (const char* h : {"x", "y", "mean_log10_theta", "q05", "q95", "p_exceed", "p11_mean", "p00_mean"}) w.field(h);
  w.end_row();
  for (Index k = 0; k < s.size(); ++k) {
    w.number(s.nodes(k, 0)).number(s.nodes(k, 1));
    if (s.mask[k]) {
      for (int c = 0; c < 6; ++c) w.field("NA");
    } else {
      w.number(s.mean_log10_theta(k)).number(s.q05(k)).number(s.q95(k)).number(s.p_exceed(k));
      w.number(s.p11_mean(k)).number(s.p00_mean(k));
    }
    w.end_row();
  }
  w.close();
}

OrdinalTable read_ordinal_table(const fs::path& path) {
  const std::string file = path.string();
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2 || t.header[0] != "K") throw IngestError(file, 1, 0, "first line must be 'K,<K>'");
  int K = 0;
  try {
    K = std::stoi(t.header[1]);
  } catch (const std::exception&) {
    throw IngestError(file, 1, 2, "K is not an integer");
  }
  if (K < 2) throw IngestError(file, 1, 2, "K must be at least 2");
  if (static_cast<int>(t.rows.size()) != K) throw IngestError(file, 0, 0, "expected K rows of cells");
  OrdinalTable out;
  out.cells.resize(K, K);
  for (int a = 0; a < K; ++a) {
    if (static_cast<int>(t.rows[a].size()) != K) throw IngestError(file, a + 2, 0, "expected K cells");
    for (int b = 0; b < K; ++b) out.cells(a, b) = parse_field(t, t.rows[a][b], file, a + 2, b + 1);
  }
  out.validate();
  return out;
}

void write_ordinal_table(const OrdinalTable& table, const fs::path& path) {
  CsvWriter w(path);
  w.field("K").integer(table.K()).end_row();
  for (int a = 0; a < table.K(); ++a) {
    for (int b = 0; b < table.K(); ++b) w.number(table.cells(a, b));
    w.end_row();
  }
  w.close();
}

Coords project_equirectangular(const Coords& lonlat) {
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double deg = std::numbers::pi / 180.0;
  if (lonlat.rows() == 0) return lonlat;
  const double lat0 = lonlat.col(1).mean() * deg;
  Coords out(lonlat.rows(), 2);
  out.col(0) = lonlat.col(0) * (deg * kEarthRadiusKm * std::cos(lat0));
  out.col(1) = lonlat.col(1) * (deg * kEarthRadiusKm);
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(path.string(), 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

}  // namespace jsdm
