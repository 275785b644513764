#include "jsdm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "jsdm/errors.hpp"
#include "jsdm/json_util.hpp"
#include "jsdm/kernels.hpp"
#include "jsdm/prob_core.hpp"

namespace jsdm {
namespace {

constexpr double kSigma2 = 1.0;  // fixed for identifiability
constexpr std::uint64_t kInitStream = std::numeric_limits<std::uint64_t>::max();

VectorXd standard_normals(ChainState& state, Index n) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = state.normal(state.rng);
  return v;
}

Index free_loadings(Index species, Index r) { return species < r ? species + 1 : r; }

MatrixXd fixed_effects(const SamplerContext& ctx, const ChainState& state) {
  return ctx.data().X * state.params.B.transpose();
}

}  // namespace

// ---------------------------------------------------------------------------
// ChainConfig

void ChainConfig::validate() const {
  if (iterations < 1) throw DomainError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw DomainError("burn_in must lie in [0, iterations)");
  if (thin < 1) throw DomainError("thin must be at least 1");
  if (r < 1) throw DomainError("factor count r must be at least 1");
  if (!(prior_var_B > 0.0) || !(prior_var_Lambda > 0.0)) throw DomainError("prior variances must be positive");
  if (phi_grid.size() > 10) throw DomainError("phi grid holds at most 10 candidates");
  for (double c : phi_grid) {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("phi grid values must be positive");
  }
  if (!std::isfinite(phi)) throw DomainError("phi must be finite");
}

nlohmann::json ChainConfig::to_json() const {
  return {{"iterations", iterations},     {"burn_in", burn_in},   {"thin", thin},
          {"r", r},                       {"spatial", spatial},   {"phi", phi},
          {"phi_grid", phi_grid},         {"prior_var_B", prior_var_B},
          {"prior_var_Lambda", prior_var_Lambda}, {"seed", seed}};
}

ChainConfig ChainConfig::from_json(const nlohmann::json& j) {
  ChainConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.thin = j.value("thin", c.thin);
  c.r = j.value("r", c.r);
  c.spatial = j.value("spatial", c.spatial);
  c.phi = j.value("phi", c.phi);
  c.phi_grid = j.value("phi_grid", c.phi_grid);
  c.prior_var_B = j.value("prior_var_B", c.prior_var_B);
  c.prior_var_Lambda = j.value("prior_var_Lambda", c.prior_var_Lambda);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string ChainConfig::hash() const { return fnv1a_hex(to_json().dump()); }

// ---------------------------------------------------------------------------
// SamplerContext

SamplerContext::SamplerContext(const PresenceData& data, ChainConfig config) : data_(&data), config_(std::move(config)) {
  data.validate();
  config_.validate();
  if (config_.r > data.S()) throw DomainError("factor count r exceeds species count");
  if (config_.phi <= 0.0) config_.phi = default_phi(data.coords);
  if (!config_.phi_grid.empty() &&
      std::find(config_.phi_grid.begin(), config_.phi_grid.end(), config_.phi) == config_.phi_grid.end()) {
    config_.phi = config_.phi_grid.front();
  }

  const MatrixXd xtx = data.X.transpose() * data.X;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(xtx, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  design_cond_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(design_cond_ < 1e12)) {
    std::ostringstream msg;
    msg << "design matrix is singular or collinear (condition number of X^T X = " << design_cond_ << ")";
    throw NumericalError(msg.str());
  }
  MatrixXd q = xtx / kSigma2;
  q.diagonal().array() += 1.0 / config_.prior_var_B;
  b_precision_.compute(q);

  if (config_.spatial) {
    if (config_.phi_grid.empty()) {
      spectra_.push_back(GpSpectrum::build(data.coords, config_.phi));
    } else {
      for (double c : config_.phi_grid) spectra_.push_back(GpSpectrum::build(data.coords, c));
    }
  }
}

const GpSpectrum& SamplerContext::spectrum(double phi) const {
  for (const auto& s : spectra_) {
    if (s.phi == phi) return s;
  }
  throw StructuralError("no GP spectrum for the requested decay");
}

// ---------------------------------------------------------------------------
// init

ChainState init_chain(const SamplerContext& ctx) {
  const auto& data = ctx.data();
  const auto& cfg = ctx.config();
  const Index n = data.n(), S = data.S(), p = data.p(), r = cfg.r;

  ChainState state;
  state.rng.seed(stream_seed(cfg.seed, kInitStream, 0));
  state.params.B = MatrixXd::Zero(S, p);
  state.params.Lambda = MatrixXd::Zero(S, r);
  state.params.W = MatrixXd::Zero(n, r);
  state.params.sigma2_eps = kSigma2;
  state.params.phi = cfg.phi;

  const double floor = 1.0 / (2.0 * static_cast<double>(n));
  for (Index j = 0; j < S; ++j) {
    double prevalence = data.Y.col(j).cast<double>().mean();
    if (prevalence < floor || prevalence > 1.0 - floor) {
      state.warnings.push_back("species '" + data.species_names[j] + "' has prevalence " + std::to_string(prevalence) +
                               "; intercept initialized from clamped prevalence");
      prevalence = std::clamp(prevalence, floor, 1.0 - floor);
    }
    state.params.B(j, 0) = std_normal_quantile(prevalence);
    for (Index h = 0; h < free_loadings(j, r); ++h) {
      const double v = 0.1 * state.normal(state.rng);
      state.params.Lambda(j, h) = h == j ? 0.1 + std::abs(v) : v;
    }
  }
  state.Z = MatrixXd::Zero(n, S);
  kernels::update_latent_omp(state.Z, fixed_effects(ctx, state), data.Y, std::sqrt(kSigma2), cfg.seed, kInitStream);
  return state;
}

// ---------------------------------------------------------------------------
// full conditionals

GaussianConditional conditional_B(const ChainState& state, const SamplerContext& ctx, Index species) {
  const auto& X = ctx.data().X;
  const VectorXd target = state.Z.col(species) - state.params.W * state.params.Lambda.row(species).transpose();
  GaussianConditional g;
  g.mean = ctx.b_precision().solve(X.transpose() * target / kSigma2);
  g.cov = ctx.b_precision().solve(MatrixXd::Identity(X.cols(), X.cols()));
  return g;
}

GaussianConditional conditional_Lambda(const ChainState& state, const SamplerContext& ctx, Index species) {
  const auto& X = ctx.data().X;
  const Index q = free_loadings(species, state.params.r());
  const VectorXd resid = state.Z.col(species) - X * state.params.B.row(species).transpose();
  const MatrixXd Wq = state.params.W.leftCols(q);
  MatrixXd prec = Wq.transpose() * Wq / kSigma2;
  prec.diagonal().array() += 1.0 / ctx.config().prior_var_Lambda;
  const Eigen::LLT<MatrixXd> llt(prec);
  GaussianConditional g;
  g.mean = llt.solve(Wq.transpose() * resid / kSigma2);
  g.cov = llt.solve(MatrixXd::Identity(q, q));
  return g;
}

GaussianConditional conditional_W_site(const ChainState& state, const SamplerContext& ctx, Index site) {
  const auto& L = state.params.Lambda;
  const VectorXd resid =
      state.Z.row(site).transpose() - state.params.B * ctx.data().X.row(site).transpose();
  MatrixXd prec = L.transpose() * L / kSigma2;
  prec.diagonal().array() += 1.0;
  const Eigen::LLT<MatrixXd> llt(prec);
  GaussianConditional g;
  g.mean = llt.solve(L.transpose() * resid / kSigma2);
  g.cov = llt.solve(MatrixXd::Identity(L.cols(), L.cols()));
  return g;
}

namespace {

struct FactorSolve {
  VectorXd projected_mean;  // U^T mean
  VectorXd gain;            // 1 / (1/d + a)
};

FactorSolve factor_solve(const ChainState& state, const SamplerContext& ctx, Index h, const GpSpectrum& sp) {
  const auto& P = state.params;
  MatrixXd resid = state.Z - fixed_effects(ctx, state) - P.W * P.Lambda.transpose();
  resid += P.W.col(h) * P.Lambda.col(h).transpose();
  const VectorXd b = resid * P.Lambda.col(h) / kSigma2;
  const double a = P.Lambda.col(h).squaredNorm() / kSigma2;
  FactorSolve fs;
  fs.gain = (sp.d.cwiseInverse().array() + a).inverse().matrix();
  fs.projected_mean = fs.gain.cwiseProduct(sp.U.transpose() * b);
  return fs;
}

}  // namespace

GaussianConditional conditional_W_factor(const ChainState& state, const SamplerContext& ctx, Index factor) {
  if (!ctx.config().spatial) throw StructuralError("factor-column conditional requires the spatial model");
  const GpSpectrum& sp = ctx.spectrum(state.params.phi);
  const FactorSolve fs = factor_solve(state, ctx, factor, sp);
  GaussianConditional g;
  g.mean = sp.U * fs.projected_mean;
  g.cov = sp.U * fs.gain.asDiagonal() * sp.U.transpose();
  return g;
}

// ---------------------------------------------------------------------------
// updates

void update_Z(ChainState& state, const SamplerContext& ctx) {
  const MatrixXd eta = linear_predictor(state.params, ctx.data().X);
  kernels::update_latent_omp(state.Z, eta, ctx.data().Y, std::sqrt(kSigma2), ctx.config().seed,
                             static_cast<std::uint64_t>(state.iteration) + 1);
}

void update_B(ChainState& state, const SamplerContext& ctx) {
  const auto upper = ctx.b_precision().matrixU();
  for (Index j = 0; j < state.params.S(); ++j) {
    const GaussianConditional g = conditional_B(state, ctx, j);
    const VectorXd xi = standard_normals(state, g.mean.size());
    state.params.B.row(j) = (g.mean + upper.solve(xi)).transpose();
  }
}

void update_Lambda(ChainState& state, const SamplerContext& ctx) {
  const Index r = state.params.r();
  for (Index j = 0; j < state.params.S(); ++j) {
    const GaussianConditional g = conditional_Lambda(state, ctx, j);
    const Index q = g.mean.size();
    if (j >= r) {
      const Eigen::LLT<MatrixXd> cov_chol(g.cov);
      const VectorXd xi = standard_normals(state, q);
      state.params.Lambda.row(j) = (g.mean + cov_chol.matrixL() * xi).transpose();
      continue;
    }
    // Constrained row: coordinate-wise Gibbs within the joint conditional,
    // diagonal entry truncated to (0, inf), entries right of the diagonal stay 0.
    const MatrixXd prec = g.cov.inverse();
    for (Index h = 0; h < q; ++h) {
      double shift = 0.0;
      for (Index k = 0; k < q; ++k) {
        if (k != h) shift += prec(h, k) * (state.params.Lambda(j, k) - g.mean(k));
      }
      const double m = g.mean(h) - shift / prec(h, h);
      const double sd = 1.0 / std::sqrt(prec(h, h));
      state.params.Lambda(j, h) =
          h == j ? sample_truncated_normal(m, sd, 0.0, kInf, state.rng) : m + sd * state.normal(state.rng);
    }
  }
}

void update_W(ChainState& state, const SamplerContext& ctx) {
  auto& P = state.params;
  const Index n = ctx.data().n(), r = P.r();
  if (!ctx.config().spatial) {
    MatrixXd prec = P.Lambda.transpose() * P.Lambda / kSigma2;
    prec.diagonal().array() += 1.0;
    const Eigen::LLT<MatrixXd> llt(prec);
    const MatrixXd resid = state.Z - fixed_effects(ctx, state);
    const MatrixXd mean = llt.solve(P.Lambda.transpose() * resid.transpose() / kSigma2).transpose();  // n x r
    const auto upper = llt.matrixU();
    for (Index i = 0; i < n; ++i) {
      const VectorXd xi = standard_normals(state, r);
      P.W.row(i) = mean.row(i) + upper.solve(xi).transpose();
    }
    return;
  }
  const GpSpectrum& sp = ctx.spectrum(P.phi);
  for (Index h = 0; h < r; ++h) {
    const FactorSolve fs = factor_solve(state, ctx, h, sp);
    const VectorXd xi = standard_normals(state, n);
    P.W.col(h) = sp.U * (fs.projected_mean + fs.gain.cwiseSqrt().cwiseProduct(xi));
  }
}

void update_orientation(ChainState& state, const SamplerContext& ctx) {
  auto& P = state.params;
  const Index r = std::min(P.r(), P.S());
  for (Index h = 0; h < r; ++h) {
    const double lhh = P.Lambda(h, h);
    const VectorXd resid =
        state.Z.col(h) - ctx.data().X * P.B.row(h).transpose() - P.W * P.Lambda.row(h).transpose();
    const VectorXd flipped = resid + 2.0 * lhh * P.W.col(h);
    const double log_accept = -0.5 * (flipped.squaredNorm() - resid.squaredNorm()) / kSigma2;
    if (std::log(uniform01(state.rng)) >= log_accept) continue;
    P.Lambda.col(h) = -P.Lambda.col(h);
    P.Lambda(h, h) = lhh;
    P.W.col(h) = -P.W.col(h);
  }
}

void update_phi(ChainState& state, const SamplerContext& ctx) {
  if (!ctx.config().spatial || ctx.config().phi_grid.empty()) return;
  const auto& spectra = ctx.spectra();
  std::vector<double> logp(spectra.size());
  for (std::size_t c = 0; c < spectra.size(); ++c) {
    double lp = 0.0;
    for (Index h = 0; h < state.params.r(); ++h) lp += spectra[c].log_density(state.params.W.col(h));
    logp[c] = lp;
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  double total = 0.0;
  for (double& v : logp) total += (v = std::exp(v - top));
  double u = uniform01(state.rng) * total;
  std::size_t pick = 0;
  for (; pick + 1 < logp.size(); ++pick) {
    if ((u -= logp[pick]) <= 0.0) break;
  }
  state.params.phi = spectra[pick].phi;
}

void sweep(ChainState& state, const SamplerContext& ctx) {
  update_Z(state, ctx);
  update_B(state, ctx);
  update_Lambda(state, ctx);
  update_W(state, ctx);
  update_orientation(state, ctx);
  update_phi(state, ctx);
  ++state.iteration;
}

double log_posterior(const ChainState& state, const SamplerContext& ctx) {
  const auto& data = ctx.data();
  const auto& P = state.params;
  const MatrixXd eta = linear_predictor(P, data.X) / std::sqrt(kSigma2);
  double lp = 0.0;
  for (Index j = 0; j < eta.cols(); ++j) {
    for (Index i = 0; i < eta.rows(); ++i) lp += log_std_normal_cdf(data.Y(i, j) ? eta(i, j) : -eta(i, j));
  }
  lp -= 0.5 * P.B.squaredNorm() / ctx.config().prior_var_B;
  double lam = 0.0;
  for (Index j = 0; j < P.S(); ++j) lam += P.Lambda.row(j).head(free_loadings(j, P.r())).squaredNorm();
  lp -= 0.5 * lam / ctx.config().prior_var_Lambda;
  if (ctx.config().spatial) {
    const GpSpectrum& sp = ctx.spectrum(P.phi);
    for (Index h = 0; h < P.r(); ++h) lp += sp.log_density(P.W.col(h));
  } else {
    lp -= 0.5 * P.W.squaredNorm();
  }
  return lp;
}

// ---------------------------------------------------------------------------
// draws, run, checkpoints

ModelParams PosteriorDraws::params(Index d) const {
  if (d < 0 || d >= size()) throw StructuralError("draw index out of range");
  ModelParams p;
  p.B = B[d];
  p.Lambda = Lambda[d];
  p.W = W[d];
  p.sigma2_eps = kSigma2;
  p.phi = phi[d];
  return p;
}

void PosteriorDraws::validate() const {
  const std::size_t D = B.size();
  if (Lambda.size() != D || W.size() != D || H.size() != D || phi.size() != D)
    throw StructuralError("posterior draw components have different lengths");
  for (std::size_t d = 0; d < D; ++d) {
    if (B[d].rows() != S() || Lambda[d].rows() != S()) throw StructuralError("draw species dimension mismatch");
    if (B[d].cols() != X.cols()) throw StructuralError("draw covariate dimension mismatch");
    if (W[d].rows() != X.rows()) throw StructuralError("draw site dimension mismatch");
  }
}

namespace {

PosteriorDraws continue_chain(const PresenceData& data, const SamplerContext& ctx, ChainState& state,
                              const RunOptions& options) {
  const auto& cfg = ctx.config();
  PosteriorDraws out;
  out.config = cfg;
  out.X = data.X;
  out.coords = data.coords;
  out.species_names = data.species_names;
  out.site_ids = data.site_ids;
  out.scaling = data.scaling;
  out.warnings = state.warnings;
  const auto kept = static_cast<std::size_t>((cfg.iterations - cfg.burn_in) / cfg.thin);
  out.B.reserve(kept);
  out.Lambda.reserve(kept);
  out.W.reserve(kept);
  out.H.reserve(kept);
  try {
    while (state.iteration < cfg.iterations) {
      sweep(state, ctx);
      const long t = state.iteration;
      out.log_posterior.push_back(log_posterior(state, ctx));
      if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0) {
        out.B.push_back(state.params.B);
        out.Lambda.push_back(state.params.Lambda);
        out.W.push_back(state.params.W);
        out.H.push_back(assemble_sigma_star(state.params.Lambda, kSigma2).H);
        out.phi.push_back(state.params.phi);
      }
    }
  } catch (...) {
    if (!options.checkpoint_on_failure.empty()) {
      std::ofstream f(options.checkpoint_on_failure);
      f << checkpoint_json(state, cfg).dump();
    }
    throw;
  }
  return out;
}

}  // namespace

PosteriorDraws run(const PresenceData& data, const ChainConfig& config, const RunOptions& options) {
  const SamplerContext ctx(data, config);
  ChainState state = init_chain(ctx);
  return continue_chain(data, ctx, state, options);
}

PosteriorDraws resume(const PresenceData& data, const nlohmann::json& checkpoint, const RunOptions& options) {
  const ChainConfig cfg = ChainConfig::from_json(checkpoint.at("config"));
  const SamplerContext ctx(data, cfg);
  ChainState state = restore_state(checkpoint, ctx.config());
  if (state.Z.rows() != data.n() || state.Z.cols() != data.S())
    throw StructuralError("checkpoint does not match the supplied data");
  return continue_chain(data, ctx, state, options);
}

nlohmann::json checkpoint_json(const ChainState& state, const ChainConfig& config) {
  std::ostringstream rng, normal;
  rng << state.rng;
  normal << state.normal;
  return {{"format", "jsdm-chain-checkpoint"},
          {"version", 1},
          {"config", config.to_json()},
          {"config_hash", config.hash()},
          {"iteration", state.iteration},
          {"Z", matrix_to_json(state.Z)},
          {"B", matrix_to_json(state.params.B)},
          {"Lambda", matrix_to_json(state.params.Lambda)},
          {"W", matrix_to_json(state.params.W)},
          {"phi", state.params.phi},
          {"rng", rng.str()},
          {"normal", normal.str()},
          {"warnings", state.warnings}};
}

ChainState restore_state(const nlohmann::json& checkpoint, const ChainConfig& config) {
  if (checkpoint.value("format", "") != "jsdm-chain-checkpoint") throw StructuralError("not a chain checkpoint");
  const ChainConfig stored = ChainConfig::from_json(checkpoint.at("config"));
  if (stored.hash() != checkpoint.at("config_hash").get<std::string>())
    throw StructuralError("checkpoint config hash does not match its config");
  if (stored.seed != config.seed || stored.r != config.r || stored.spatial != config.spatial)
    throw StructuralError("checkpoint belongs to a different chain configuration");
  ChainState s;
  s.iteration = checkpoint.at("iteration").get<long>();
  s.Z = matrix_from_json(checkpoint.at("Z"));
  s.params.B = matrix_from_json(checkpoint.at("B"));
  s.params.Lambda = matrix_from_json(checkpoint.at("Lambda"));
  s.params.W = matrix_from_json(checkpoint.at("W"));
  s.params.phi = checkpoint.at("phi").get<double>();
  s.params.sigma2_eps = kSigma2;
  std::istringstream rng(checkpoint.at("rng").get<std::string>());
  rng >> s.rng;
  std::istringstream normal(checkpoint.at("normal").get<std::string>());
  normal >> s.normal;
  s.warnings = checkpoint.value("warnings", std::vector<std::string>{});
  return s;
}

}  // namespace jsdm
