#include "jsdm/cli.hpp"

#include <fcntl.h>
#include <png.h>
#include <signal.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "jsdm/errors.hpp"
#include "jsdm/heatmap.hpp"
#include "jsdm/inference.hpp"
#include "jsdm/io.hpp"
#include "jsdm/json_util.hpp"
#include "jsdm/ordinal.hpp"
#include "jsdm/parallel.hpp"
#include "jsdm/simulate.hpp"

namespace jsdm::cli {
namespace {

using nlohmann::json;

const std::vector<std::string> kCommands{"simulate", "fit", "surfaces", "richness", "ordinal", "report", "project"};

json command_defaults(const std::string& command) {
  if (command == "simulate") {
    return {{"sites", 200},        {"species", 8},          {"covariates", 2},    {"factors", 2},
            {"spatial", true},     {"phi", 0.0},            {"domain", 1.0},      {"sigma2_eps", 1.0},
            {"coefficient_sd", 0.75}, {"loading_sd", 1.0},  {"grid", {40, 40}},   {"pairs", json::array()},
            {"B", nullptr},        {"Lambda", nullptr}};
  }
  if (command == "fit") {
    return {{"input", ""},     {"sites", ""},        {"species", ""},   {"iterations", 10000},
            {"burn_in", 5000}, {"thin", 1},          {"factors", 3},    {"spatial", true},
            {"phi", 0.0},      {"phi_grid", json::array()}, {"prior_var_B", 100.0}, {"prior_var_Lambda", 1.0}};
  }
  if (command == "surfaces") {
    return {{"input", ""},         {"raster", ""},          {"pairs", json::array()}, {"grid", {40, 40}},
            {"method", "analytic"}, {"mc_draws", 10000},    {"kriged_samples", 64},   {"max_distance", nullptr},
            {"heatmaps", true}};
  }
  if (command == "richness") return {{"input", ""}};
  if (command == "ordinal") {
    return {{"input", ""}, {"mu1", 0.0}, {"mu2", 0.0}, {"rho", 0.5}, {"cut1", {-0.5, 0.5}}, {"cut2", {-0.5, 0.5}}};
  }
  if (command == "report") return {{"input", ""}, {"pairs", json::array()}};
  if (command == "project") return {{"input", ""}, {"species", ""}};
  throw StructuralError("unknown command '" + command + "'");
}

std::string param_string(const json& p, const char* key) { return p.at(key).get<std::string>(); }

void require_path(const std::string& what, const std::string& path) {
  if (path.empty()) throw MissingInputError(what + " not given");
  if (!fs::exists(path)) throw MissingInputError(what + " '" + path + "' does not exist");
}

std::string versions_compiler() {
#ifdef __VERSION__
  return __VERSION__;
#else
  return "unknown";
#endif
}

json versions() {
  return {{"jsdm_odds", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"libpng", PNG_LIBPNG_VER_STRING},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
          {"openmp", _OPENMP},
          {"compiler", versions_compiler()}};
}

// Files written by a command, relative to the output directory.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) {
    names_.insert(name);
    return dir_ / name;
  }
  void add_tree(const std::string& sub) {
    for (const auto& e : fs::recursive_directory_iterator(dir_ / sub)) {
      if (e.is_regular_file()) names_.insert(fs::relative(e.path(), dir_).generic_string());
    }
  }
  json hashes() const {
    json h = json::object();
    for (const auto& n : names_) h[n] = fnv1a_hex(read_file(dir_ / n));
    return h;
  }

 private:
  fs::path dir_;
  std::set<std::string> names_;
};

std::optional<std::string> parent_hash(const fs::path& input) {
  fs::path dir = fs::is_directory(input) ? input : input.parent_path();
  const fs::path m = dir / kManifestName;
  if (!fs::exists(m)) return std::nullopt;
  try {
    const json doc = json::parse(read_file(m));
    if (doc.contains("config_hash") && doc["config_hash"].is_string()) return doc["config_hash"].get<std::string>();
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

Index species_index(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DomainError("unknown species '" + name + "'");
  return static_cast<Index>(it - names.begin());
}

std::vector<std::pair<Index, Index>> resolve_pairs(const json& pairs, const std::vector<std::string>& names,
                                                   bool all_when_empty) {
  std::vector<std::pair<Index, Index>> out;
  for (const auto& p : pairs) {
    const Index a = species_index(names, p.at(0).get<std::string>());
    const Index b = species_index(names, p.at(1).get<std::string>());
    if (a == b) throw DomainError("pair needs two distinct species: '" + names[a] + "'");
    out.emplace_back(a, b);
  }
  if (out.empty() && all_when_empty) {
    const Index S = static_cast<Index>(names.size());
    for (Index a = 0; a < S; ++a) {
      for (Index b = a + 1; b < S; ++b) out.emplace_back(a, b);
    }
  }
  return out;
}

std::string pair_tag(const std::vector<std::string>& names, Index a, Index b) { return names[a] + "_" + names[b]; }

GridSpec grid_over(const json& grid, const Coords& coords) {
  const Index nx = grid.at(0).get<Index>(), ny = grid.at(1).get<Index>();
  GridSpec g = GridSpec::covering(coords, nx, ny);
  g.validate();
  return g;
}

PosteriorDraws load_fit(const std::string& input) {
  require_path("fit directory", input);
  const fs::path dir = fs::path(input) / "draws";
  if (!fs::exists(dir / "draws.json")) {
    throw MissingInputError("no fit artifacts in '" + input + "' (run `fit` first)");
  }
  return read_draws(dir);
}

// Raw covariates at the fit's data sites, used when no raster is supplied.
CovariateRaster raster_from_sites(const PosteriorDraws& draws) {
  CovariateRaster r;
  r.coords = draws.coords;
  const Index q = draws.X.cols() - 1;
  r.values.resize(draws.X.rows(), q);
  for (Index c = 0; c < q; ++c) {
    const bool scaled = draws.scaling.sd.size() == q;
    r.values.col(c) = scaled ? (draws.X.col(c + 1).array() * draws.scaling.sd(c) + draws.scaling.mean(c)).matrix()
                             : VectorXd(draws.X.col(c + 1));
  }
  return r;
}

MatrixXd json_matrix_or_empty(const json& j) {
  if (j.is_null()) return {};
  if (j.is_array()) {
    const Index rows = static_cast<Index>(j.size());
    const Index cols = rows ? static_cast<Index>(j.at(0).size()) : 0;
    MatrixXd m(rows, cols);
    for (Index a = 0; a < rows; ++a) {
      if (static_cast<Index>(j[a].size()) != cols) throw StructuralError("ragged matrix in config");
      for (Index b = 0; b < cols; ++b) m(a, b) = j[a][b].get<double>();
    }
    return m;
  }
  return matrix_from_json(j);
}

// ---------------------------------------------------------------------------
// Commands

void run_simulate(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  const json& p = cfg.params;
  const Index n = p.at("sites"), S = p.at("species"), q = p.at("covariates"), r = p.at("factors");
  const double domain = p.at("domain");
  const bool spatial = p.at("spatial");
  if (n < 2 || S < 2 || q < 0 || r < 1 || r > S || !(domain > 0.0)) {
    throw DomainError("simulate needs sites >= 2, species >= 2, covariates >= 0, 1 <= factors <= species, domain > 0");
  }

  Rng site_rng(stream_seed(cfg.seed, 1));
  Coords coords(n, 2);
  for (Index i = 0; i < n; ++i) {
    coords(i, 0) = domain * uniform01(site_rng);
    coords(i, 1) = domain * uniform01(site_rng);
  }
  Rng cov_rng(stream_seed(cfg.seed, 2));
  const SyntheticCovariates field(q, domain, cov_rng);
  const MatrixXd raw = field.evaluate(coords);

  CovariateScaling scaling;
  for (Index c = 0; c < q; ++c) scaling.names.push_back("cov" + std::to_string(c + 1));
  scaling.mean = raw.colwise().mean().transpose();
  scaling.sd.resize(q);
  MatrixXd X(n, q + 1);
  X.col(0).setOnes();
  for (Index c = 0; c < q; ++c) {
    scaling.sd(c) = std::sqrt((raw.col(c).array() - scaling.mean(c)).square().sum() / static_cast<double>(n - 1));
    X.col(c + 1) = (raw.col(c).array() - scaling.mean(c)) / scaling.sd(c);
  }

  ModelParams params;
  params.sigma2_eps = p.at("sigma2_eps");
  params.B = json_matrix_or_empty(p.at("B"));
  params.Lambda = json_matrix_or_empty(p.at("Lambda"));
  Rng par_rng(stream_seed(cfg.seed, 3));
  std::normal_distribution<double> normal;
  if (params.B.size() == 0) {
    params.B.resize(S, q + 1);
    const double sd = p.at("coefficient_sd");
    for (Index j = 0; j < S; ++j) {
      for (Index c = 0; c <= q; ++c) params.B(j, c) = sd * normal(par_rng);
    }
  }
  if (params.Lambda.size() == 0) {
    params.Lambda.resize(S, r);
    const double sd = p.at("loading_sd");
    for (Index j = 0; j < S; ++j) {
      for (Index h = 0; h < r; ++h) {
        const double v = sd * normal(par_rng);
        params.Lambda(j, h) = h > j ? 0.0 : (h == j ? std::abs(v) + 0.1 : v);
      }
    }
  }
  const double phi = p.at("phi");
  params.phi = phi > 0.0 ? phi : default_phi(coords);
  params.validate();
  if (params.S() != S || params.p() != q + 1 || params.r() != r) {
    throw StructuralError("supplied B / Lambda do not match species, covariates and factors");
  }

  Rng sim_rng(stream_seed(cfg.seed, 4));
  SimulationTrace trace;
  PresenceData data =
      simulate_community(params, coords, X, sim_rng, spatial ? FactorField::spatial : FactorField::independent, &trace);
  data.scaling = scaling;
  data.validate();

  write_presence_data(data, outputs.dir());
  outputs.path("sites.csv");
  outputs.path("species.csv");

  GridSpec gspec{p.at("grid").at(0).get<Index>(), p.at("grid").at(1).get<Index>(), 0.0, domain, 0.0, domain};
  gspec.validate();
  const Coords nodes = gspec.nodes();
  write_raster(nodes, field.evaluate(nodes), scaling.names, outputs.path("raster.csv"));

  const SpeciesCovariance cov = assemble_sigma_star(params.Lambda, params.sigma2_eps);
  CovariateRaster raster{nodes, field.evaluate(nodes)};
  const PredictionGrid grid = build_prediction_grid(gspec, raster, scaling);

  json truth = {{"species", data.species_names}, {"covariates", scaling.names},
                {"B", matrix_to_json(params.B)},  {"Lambda", matrix_to_json(params.Lambda)},
                {"H", matrix_to_json(cov.H)},     {"phi", params.phi},
                {"sigma2_eps", params.sigma2_eps}, {"spatial", spatial},
                {"W", matrix_to_json(trace.W)}};
  json pair_rows = json::array();
  for (const auto& [a, b] : resolve_pairs(p.at("pairs"), data.species_names, true)) {
    const SurfaceGrid s = true_odds_surface(params, grid, a, b);
    double lo = kInf, hi = -kInf, sum = 0.0;
    Index used = 0;
    for (Index k = 0; k < s.size(); ++k) {
      if (s.mask[k]) continue;
      lo = std::min(lo, s.mean_log10_theta(k));
      hi = std::max(hi, s.mean_log10_theta(k));
      sum += s.mean_log10_theta(k);
      ++used;
    }
    pair_rows.push_back({{"species_a", data.species_names[a]},
                         {"species_b", data.species_names[b]},
                         {"H", cov.H(a, b)},
                         {"log10_theta_min", lo},
                         {"log10_theta_mean", used ? sum / static_cast<double>(used) : 0.0},
                         {"log10_theta_max", hi}});
    if (!p.at("pairs").empty()) write_surface_csv(s, outputs.path("true_surface_" + pair_tag(data.species_names, a, b) + ".csv"));
  }
  truth["pairs"] = pair_rows;
  write_file(outputs.path("truth.json"), truth.dump(2) + "\n");

  const long presences = data.Y.cast<long>().sum();
  out << "simulated n=" << n << ", S=" << S << ", presences=" << presences << "\n";
}

void run_fit(const RunConfig& cfg, Outputs& outputs, std::ostream& out, std::ostream& err) {
  const json& p = cfg.params;
  std::string sites = param_string(p, "sites"), species = param_string(p, "species");
  const std::string input = param_string(p, "input");
  if (!input.empty()) {
    if (sites.empty()) sites = (fs::path(input) / "sites.csv").string();
    if (species.empty()) species = (fs::path(input) / "species.csv").string();
  }
  require_path("sites file", sites);
  require_path("species file", species);
  const Ingested in = ingest(sites, species);
  out << in.report.summary() << "\n";

  ChainConfig chain;
  chain.iterations = p.at("iterations");
  chain.burn_in = p.at("burn_in");
  chain.thin = p.at("thin");
  chain.r = p.at("factors");
  chain.spatial = p.at("spatial");
  chain.phi = p.at("phi");
  chain.phi_grid = p.at("phi_grid").get<std::vector<double>>();
  chain.prior_var_B = p.at("prior_var_B");
  chain.prior_var_Lambda = p.at("prior_var_Lambda");
  chain.seed = cfg.seed;
  chain.validate();

  RunOptions opts;
  opts.checkpoint_on_failure = (outputs.dir() / "checkpoint.json").string();
  const PosteriorDraws draws = run(in.data, chain, opts);
  for (const auto& w : draws.warnings) err << "warning: " << w << "\n";
  write_draws(draws, outputs.dir() / "draws");
  outputs.add_tree("draws");

  const Index S = draws.S(), D = draws.size();
  std::ofstream csv(outputs.path("fit_summary.csv"));
  csv << "species_a,species_b,H_mean,H_q05,H_q95\n";
  for (Index a = 0; a < S; ++a) {
    for (Index b = a + 1; b < S; ++b) {
      std::vector<double> h(D);
      for (Index d = 0; d < D; ++d) h[d] = draws.H[d](a, b);
      double mean = 0.0;
      for (double v : h) mean += v;
      mean /= static_cast<double>(D);
      csv << draws.species_names[a] << ',' << draws.species_names[b] << ',' << format_number(mean) << ','
          << format_number(sample_quantile(h, 0.05)) << ',' << format_number(sample_quantile(h, 0.95)) << '\n';
    }
  }
  out << "stored " << D << " draws\n";
}

void run_surfaces(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  const json& p = cfg.params;
  const PosteriorDraws draws = load_fit(param_string(p, "input"));
  const auto pairs = resolve_pairs(p.at("pairs"), draws.species_names, false);
  if (pairs.empty()) throw DomainError("surfaces needs at least one pair (--pairs A:B)");

  CovariateRaster raster;
  const std::string raster_path = param_string(p, "raster");
  if (!raster_path.empty()) {
    raster = read_raster(raster_path);
  } else {
    raster = raster_from_sites(draws);
  }
  if (!p.at("max_distance").is_null()) raster.max_distance = p.at("max_distance");
  const GridSpec spec = grid_over(p.at("grid"), draws.coords);
  const PredictionGrid grid = build_prediction_grid(spec, raster, draws.scaling);

  SurfaceOptions opts;
  opts.method = parse_pair_method(param_string(p, "method"));
  opts.pair.mc_draws = p.at("mc_draws");
  opts.pair.kriged_samples = p.at("kriged_samples");
  opts.pair.seed = cfg.seed;
  for (const auto& [a, b] : pairs) {
    const std::string tag = pair_tag(draws.species_names, a, b);
    const SurfaceGrid s = odds_surface(draws, grid, a, b, opts);
    write_surface_csv(s, outputs.path("surface_" + tag + ".csv"));
    if (p.at("heatmaps").get<bool>()) {
      HeatmapSpec hs{spec.nx, spec.ny};
      hs.scale = ColorScale::diverging;
      write_heatmap_png(outputs.path("surface_" + tag + "_log10_theta.png"), s.mean_log10_theta, s.mask, hs);
      hs.scale = ColorScale::sequential;
      hs.lo = 0.0;
      hs.hi = 1.0;
      write_heatmap_png(outputs.path("surface_" + tag + "_p11.png"), s.p11_mean, s.mask, hs);
    }
    out << "surface " << tag << ": " << s.size() << " nodes\n";
  }
}

void run_richness(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  const PosteriorDraws draws = load_fit(param_string(cfg.params, "input"));
  std::ofstream csv(outputs.path("richness.csv"));
  csv << "site_id,x,y,mean,variance,independence_variance\n";
  double total = 0.0;
  for (Index i = 0; i < draws.X.rows(); ++i) {
    const RichnessSummary r = richness_stats(draws, i);
    total += r.mean;
    csv << draws.site_ids[i] << ',' << format_number(draws.coords(i, 0)) << ',' << format_number(draws.coords(i, 1))
        << ',' << format_number(r.mean) << ',' << format_number(r.variance) << ','
        << format_number(r.independence_variance) << '\n';
  }
  out << "mean richness over sites: " << total / static_cast<double>(draws.X.rows()) << "\n";
}

void run_ordinal(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  const json& p = cfg.params;
  OrdinalTable table;
  const std::string input = param_string(p, "input");
  if (!input.empty()) {
    table = read_ordinal_table(input);
  } else {
    table = ordinal_table_from_gaussian(p.at("mu1"), p.at("mu2"), p.at("rho"), p.at("cut1").get<std::vector<double>>(),
                                        p.at("cut2").get<std::vector<double>>());
  }
  write_ordinal_table(table, outputs.path("ordinal_table.csv"));
  auto log10_or_na = [](auto&& f) {
    try {
      return format_number(f().log10());
    } catch (const DomainError&) {
      return std::string("NA");
    }
  };
  std::ofstream csv(outputs.path("ordinal_odds.csv"));
  csv << "k,kp,log10_local,log10_global,log10_cumulative\n";
  for (int k = 1; k < table.K(); ++k) {
    for (int kp = 1; kp < table.K(); ++kp) {
      csv << k << ',' << kp << ',' << log10_or_na([&] { return local_odds(table, k, kp); }) << ','
          << log10_or_na([&] { return global_odds(table, k, kp); }) << ','
          << log10_or_na([&] { return cumulative_odds(table, k, kp); }) << '\n';
    }
  }
  out << "ordinal odds for K=" << table.K() << "\n";
}

void run_report(const RunConfig& cfg, Outputs& outputs, std::ostream& out) {
  const PosteriorDraws draws = load_fit(param_string(cfg.params, "input"));
  const auto pairs = resolve_pairs(cfg.params.at("pairs"), draws.species_names, true);
  PredictionGrid sites;
  sites.nodes = draws.coords;
  sites.design = draws.X;
  sites.mask.assign(draws.X.rows(), 0);
  const Index D = draws.size();

  std::ofstream csv(outputs.path("report.csv"));
  csv << "species_a,species_b,H_mean,H_q05,H_q95,log10_theta_min,log10_theta_max,p_exceed_min,p_exceed_max\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-12s %8s %17s %15s\n", "species_a", "species_b", "H_mean",
                "log10_theta", "P(theta>1)");
  out << line;
  for (const auto& [a, b] : pairs) {
    std::vector<double> h(D);
    double mean = 0.0;
    for (Index d = 0; d < D; ++d) mean += (h[d] = draws.H[d](a, b));
    mean /= static_cast<double>(D);
    const SurfaceGrid s = odds_surface(draws, sites, a, b);
    const double tmin = s.mean_log10_theta.minCoeff(), tmax = s.mean_log10_theta.maxCoeff();
    const double pmin = s.p_exceed.minCoeff(), pmax = s.p_exceed.maxCoeff();
    csv << draws.species_names[a] << ',' << draws.species_names[b] << ',' << format_number(mean) << ','
        << format_number(sample_quantile(h, 0.05)) << ',' << format_number(sample_quantile(h, 0.95)) << ','
        << format_number(tmin) << ',' << format_number(tmax) << ',' << format_number(pmin) << ','
        << format_number(pmax) << '\n';
    std::snprintf(line, sizeof line, "%-12s %-12s %8.3f %7.2f .. %6.2f %6.2f .. %5.2f\n",
                  draws.species_names[a].c_str(), draws.species_names[b].c_str(), mean, tmin, tmax, pmin, pmax);
    out << line;
  }
}

void run_project(const RunConfig& cfg, Outputs& outputs, std::ostream& out, std::ostream& err) {
  const std::string input = param_string(cfg.params, "input");
  require_path("sites file", input);
  const CsvTable t = read_csv(input);
  if (t.header.size() < 3 || t.header[1] != "x" || t.header[2] != "y") {
    throw IngestError(input, 1, 0, "sites header must start with site_id,x,y");
  }
  Coords lonlat(static_cast<Index>(t.rows.size()), 2);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i].size() != t.header.size()) throw IngestError(input, i + 2, 0, "wrong number of fields");
    for (int c = 0; c < 2; ++c) {
      try {
        lonlat(static_cast<Index>(i), c) = parse_number(t.rows[i][1 + c]);
      } catch (const DomainError&) {
        throw IngestError(input, i + 2, 2 + c, "not a number: '" + t.rows[i][1 + c] + "'");
      }
    }
    if (std::abs(lonlat(static_cast<Index>(i), 0)) > 180.0 || std::abs(lonlat(static_cast<Index>(i), 1)) > 90.0) {
      throw IngestError(input, i + 2, 2, "coordinate outside lon/lat range");
    }
  }
  err << "warning: x,y read as longitude/latitude degrees and projected to planar km (equirectangular)\n";
  const Coords xy = project_equirectangular(lonlat);
  std::ofstream csv(outputs.path("sites.csv"));
  for (std::size_t c = 0; c < t.header.size(); ++c) csv << (c ? "," : "") << t.header[c];
  csv << '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    csv << t.rows[i][0] << ',' << format_number(xy(static_cast<Index>(i), 0)) << ','
        << format_number(xy(static_cast<Index>(i), 1));
    for (std::size_t c = 3; c < t.rows[i].size(); ++c) csv << ',' << t.rows[i][c];
    csv << '\n';
  }
  std::string species = param_string(cfg.params, "species");
  if (species.empty() && fs::exists(fs::path(input).parent_path() / "species.csv")) {
    species = (fs::path(input).parent_path() / "species.csv").string();
  }
  if (!species.empty()) {
    require_path("species file", species);
    write_file(outputs.path("species.csv"), read_file(species));
  }
  out << "projected " << t.rows.size() << " sites\n";
}

int report_error(std::ostream& err, const char* kind, const std::exception& e, int status) {
  err << "jsdm_odds: " << kind << ": " << e.what() << "\n";
  return status;
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string pairs;
  std::string grid;
  std::string method;
  std::string spatial;
  std::string input;
  std::string raster;
};

void add_flags(CLI::App* sub, Flags& f, const std::string& command) {
  sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "random seed");
  sub->add_option("--out", f.out, "output directory")->required();
  if (command != "ordinal" && command != "simulate") {
    sub->add_option("--in", f.input, command == "project" ? "sites CSV in lon/lat" : "input directory");
  } else if (command == "ordinal") {
    sub->add_option("--in", f.input, "ordinal table CSV");
  }
  if (command == "simulate" || command == "surfaces" || command == "report") {
    sub->add_option("--pairs", f.pairs, "species pairs, \"A:B,C:D\"");
  }
  if (command == "simulate" || command == "surfaces") sub->add_option("--grid", f.grid, "grid resolution NX,NY");
  if (command == "surfaces") {
    sub->add_option("--raster", f.raster, "covariate raster CSV (x, y, covariates)");
    sub->add_option("--method", f.method, "pair table method")->check(CLI::IsMember({"analytic", "mc", "conditional"}));
  }
  if (command == "simulate" || command == "fit") {
    sub->add_option("--spatial", f.spatial, "spatial factors")->check(CLI::IsMember({"on", "off"}));
  }
}

json flags_to_doc(const Flags& f) {
  json doc = json::object();
  if (!f.input.empty()) doc["input"] = f.input;
  if (!f.pairs.empty()) {
    json arr = json::array();
    for (const auto& [a, b] : parse_pairs(f.pairs)) arr.push_back({a, b});
    doc["pairs"] = arr;
  }
  if (!f.grid.empty()) {
    const auto [nx, ny] = parse_grid(f.grid);
    doc["grid"] = {nx, ny};
  }
  if (!f.method.empty()) doc["method"] = f.method;
  if (!f.raster.empty()) doc["raster"] = f.raster;
  if (!f.spatial.empty()) doc["spatial"] = f.spatial == "on";
  return doc;
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig RunConfig::defaults(const std::string& command) {
  RunConfig c;
  c.command = command;
  c.params = command_defaults(command);
  return c;
}

void RunConfig::merge(const json& doc) {
  if (!doc.is_object()) throw StructuralError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed") {
      if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0)) {
        throw DomainError("seed must be a non-negative integer");
      }
      seed = value.get<std::uint64_t>();
    } else if (key == "out") {
      out = value.get<std::string>();
    } else if (key == "command") {
      if (value.get<std::string>() != command) throw StructuralError("config is for command '" + value.get<std::string>() + "'");
    } else if (params.contains(key)) {
      const json& current = params[key];
      const bool numeric = current.is_number() && value.is_number();
      const bool compatible = current.is_null() || value.is_null() || numeric || current.type() == value.type();
      if (!compatible) throw StructuralError("config key '" + key + "' has the wrong type");
      params[key] = value;
    } else {
      throw StructuralError("unknown config key '" + key + "' for " + command);
    }
  }
}

void RunConfig::validate() const {
  if (out.empty()) throw StructuralError("no output directory");
  for (const char* key : {"input", "sites", "species", "raster"}) {
    if (params.contains(key) && params[key].is_string() && !params[key].get<std::string>().empty()) {
      require_path(key, params[key].get<std::string>());
    }
  }
  if (params.contains("grid")) {
    const json& g = params["grid"];
    if (!g.is_array() || g.size() != 2 || g[0].get<long>() < 2 || g[1].get<long>() < 2) {
      throw DomainError("grid resolution must be at least 2 per axis");
    }
  }
  if (params.contains("method")) parse_pair_method(params["method"].get<std::string>());
  if (params.contains("pairs")) {
    for (const auto& p : params["pairs"]) {
      if (!p.is_array() || p.size() != 2) throw StructuralError("pairs must be [name, name] entries");
    }
  }
  const bool needs_input = command == "surfaces" || command == "richness" || command == "report" || command == "project";
  if (needs_input && params["input"].get<std::string>().empty()) throw MissingInputError(command + " needs --in");
  if (command == "fit" && params["input"].get<std::string>().empty() &&
      (params["sites"].get<std::string>().empty() || params["species"].get<std::string>().empty())) {
    throw MissingInputError("fit needs --in DIR or sites and species paths");
  }
}

json RunConfig::to_json() const { return {{"command", command}, {"seed", seed}, {"params", params}}; }

std::string RunConfig::hash() const { return fnv1a_hex(to_json().dump()); }

OutputLock::OutputLock(const fs::path& dir) : path_(dir / kLockName) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      const ssize_t written = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      if (written != static_cast<ssize_t>(pid.size())) {
        fs::remove(path_);
        throw std::runtime_error("cannot write lockfile " + path_.string());
      }
      return;
    }
    if (errno != EEXIST) throw std::runtime_error("cannot create lockfile " + path_.string() + ": " + std::strerror(errno));
    long owner = 0;
    try {
      owner = std::stol(read_file(path_));
    } catch (const std::exception&) {
      owner = 0;
    }
    const bool alive = owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM);
    if (alive || attempt == 1) {
      throw LockError("output directory " + dir.string() + " is in use (lockfile held by pid " +
                      std::to_string(owner) + ")");
    }
    fs::remove(path_);
  }
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    item = first == std::string::npos ? std::string() : item.substr(first, item.find_last_not_of(" \t") - first + 1);
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == item.size() ||
        item.find(':', colon + 1) != std::string::npos) {
      throw DomainError("malformed pair '" + item + "' (expected A:B)");
    }
    out.emplace_back(item.substr(0, colon), item.substr(colon + 1));
  }
  if (out.empty()) throw DomainError("empty pair list");
  return out;
}

std::pair<long, long> parse_grid(const std::string& text) {
  const auto comma = text.find(',');
  long nx = 0, ny = 0;
  try {
    if (comma == std::string::npos) throw std::invalid_argument("no comma");
    std::size_t used = 0;
    nx = std::stol(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("trailing");
    const std::string rest = text.substr(comma + 1);
    ny = std::stol(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw DomainError("malformed grid '" + text + "' (expected NX,NY)");
  }
  if (nx < 2 || ny < 2) throw DomainError("grid resolution must be at least 2 per axis");
  return {nx, ny};
}

const std::vector<std::string>& manifest_keys() {
  static const std::vector<std::string> keys{"command",  "config",           "config_hash", "parent_config_hash",
                                             "seed",     "versions",         "threads",     "wall_time_seconds",
                                             "outputs"};
  return keys;
}

int command_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatially varying odds ratios of species co-occurrence", "jsdm_odds"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::map<std::string, Flags> flags;
  for (const auto& name : kCommands) {
    static const std::map<std::string, std::string> help{
        {"simulate", "simulate a synthetic community with known parameters"},
        {"fit", "fit the latent factor probit model by Gibbs sampling"},
        {"surfaces", "posterior odds-ratio surfaces on a grid"},
        {"richness", "posterior predictive species richness at the data sites"},
        {"ordinal", "local, global and cumulative odds ratios of an ordinal table"},
        {"report", "per-pair summary of a fit"},
        {"project", "project lon/lat site coordinates to planar km"}};
    add_flags(app.add_subcommand(name, help.at(name)), flags[name], name);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      if (dynamic_cast<const CLI::CallForVersion*>(&e)) out << kVersion << "\n";
      return kOk;
    }
    err << "jsdm_odds: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const Flags& f = flags.at(command);
  const auto start = std::chrono::steady_clock::now();
  try {
    RunConfig cfg = RunConfig::defaults(command);
    if (!f.config.empty()) {
      json doc;
      try {
        doc = json::parse(read_file(f.config));
      } catch (const json::parse_error& e) {
        throw StructuralError("config " + f.config + " is not valid JSON: " + e.what());
      }
      cfg.merge(doc);
    }
    cfg.merge(flags_to_doc(f));
    if (f.seed) cfg.seed = *f.seed;
    cfg.out = f.out;
    cfg.validate();

    fs::create_directories(cfg.out);
    OutputLock lock(cfg.out);
    Outputs outputs(cfg.out);
    if (command == "simulate") run_simulate(cfg, outputs, out);
    else if (command == "fit") run_fit(cfg, outputs, out, err);
    else if (command == "surfaces") run_surfaces(cfg, outputs, out);
    else if (command == "richness") run_richness(cfg, outputs, out);
    else if (command == "ordinal") run_ordinal(cfg, outputs, out);
    else if (command == "report") run_report(cfg, outputs, out);
    else run_project(cfg, outputs, out, err);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::optional<std::string> parent;
    const std::string input = cfg.params.value("input", std::string());
    if (!input.empty()) parent = parent_hash(input);
    nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
    manifest["command"] = command;
    manifest["config"] = cfg.to_json();
    manifest["config_hash"] = cfg.hash();
    manifest["parent_config_hash"] = parent ? json(*parent) : json(nullptr);
    manifest["seed"] = cfg.seed;
    manifest["versions"] = versions();
    manifest["threads"] = worker_count();
    manifest["wall_time_seconds"] = wall;
    manifest["outputs"] = outputs.hashes();
    write_file(cfg.out / kManifestName, manifest.dump(2) + "\n");
    return kOk;
  } catch (const LockError& e) {
    return report_error(err, "locked", e, kLocked);
  } catch (const MissingInputError& e) {
    return report_error(err, "missing input", e, kBadInput);
  } catch (const IngestError& e) {
    return report_error(err, "input error", e, kBadInput);
  } catch (const StructuralError& e) {
    return report_error(err, "invalid input", e, kBadInput);
  } catch (const DomainError& e) {
    return report_error(err, "invalid value", e, kBadInput);
  } catch (const json::exception& e) {
    return report_error(err, "invalid config", e, kBadInput);
  } catch (const std::exception& e) {
    return report_error(err, "error", e, kFailure);
  }
}

int command_dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return command_dispatch(args, std::cout, std::cerr);
}

}  // namespace jsdm::cli
