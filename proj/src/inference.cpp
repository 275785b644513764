#include "jsdm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "jsdm/errors.hpp"
#include "jsdm/gp.hpp"
#include "jsdm/kernels.hpp"
#include "jsdm/prob_core.hpp"

namespace jsdm {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_pair(const PosteriorDraws& draws, Index j, Index jp) {
  if (j < 0 || jp < 0 || j >= draws.S() || jp >= draws.S()) throw StructuralError("species index out of range");
}

VectorXd site_design(const PosteriorDraws& draws, Index site) {
  if (site < 0 || site >= draws.X.rows()) throw StructuralError("site index out of range");
  return draws.X.row(site).transpose();
}

PairTable product_table(double m1, double m2) {
  const double a1 = std_normal_cdf(m1), a2 = std_normal_cdf(m2);
  const double b1 = std_normal_cdf(-m1), b2 = std_normal_cdf(-m2);
  return {b1 * b2, b1 * a2, a1 * b2, a1 * a2};
}

/// Krigers keyed by decay; draws usually share one value.
class KrigerCache {
 public:
  explicit KrigerCache(const Coords& sites) : sites_(sites) {}
  const FactorKriger& get(double phi) {
    auto it = cache_.find(phi);
    if (it == cache_.end()) it = cache_.emplace(phi, FactorKriger(sites_, phi)).first;
    return it->second;
  }

 private:
  const Coords& sites_;
  std::map<double, FactorKriger> cache_;
};

PairTable conditional_at_point(const ModelParams& params, const FactorMoments& wm, const VectorXd& x, Index j, Index jp,
                               Index samples, Rng& rng) {
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(params.sigma2_eps);
  const double sw = std::sqrt(wm.variance);
  PairTable acc;
  for (Index s = 0; s < samples; ++s) {
    VectorXd w(wm.mean.size());
    for (Index h = 0; h < w.size(); ++h) w(h) = wm.mean(h) + sw * normal(rng);
    const double m1 = (params.B.row(j).dot(x) + params.Lambda.row(j).dot(w)) / sd;
    const double m2 = (params.B.row(jp).dot(x) + params.Lambda.row(jp).dot(w)) / sd;
    const PairTable t = product_table(m1, m2);
    acc = {acc.p00 + t.p00, acc.p01 + t.p01, acc.p10 + t.p10, acc.p11 + t.p11};
  }
  return acc.scaled(1.0 / static_cast<double>(samples));
}

/// NaN for a 0/0 table (possible with few Monte Carlo pairs); such draws are left out of summaries.
double ln_theta_of(const PairTable& t) {
  const bool num_zero = t.p00 == 0.0 || t.p11 == 0.0;
  const bool den_zero = t.p01 == 0.0 || t.p10 == 0.0;
  if (num_zero && den_zero) return kNaN;
  return odds_ratio(t).log();
}

double mean_of(const std::vector<double>& v) {
  bool pos = false, neg = false;
  double s = 0.0;
  for (double x : v) {
    if (x == kInf) pos = true;
    else if (x == -kInf) neg = true;
    else s += x;
  }
  if (pos && neg) return kNaN;
  if (pos) return kInf;
  if (neg) return -kInf;
  return s / static_cast<double>(v.size());
}

SurfaceGrid summarize(const PredictionGrid& grid, const MatrixXd& ln_theta, const MatrixXd& p11, const MatrixXd& p00,
                      bool keep_draws) {
  const Index nodes = grid.nodes.rows();
  const Index D = ln_theta.cols();
  SurfaceGrid s;
  s.nodes = grid.nodes;
  s.mask = grid.mask;
  s.mean_log10_theta = VectorXd::Constant(nodes, kNaN);
  s.q05 = s.q95 = s.p_exceed = s.p11_mean = s.p00_mean = s.mean_log10_theta;
  for (Index k = 0; k < nodes; ++k) {
    if (grid.mask[k]) continue;
    s.p11_mean(k) = p11.row(k).mean();
    s.p00_mean(k) = p00.row(k).mean();
    std::vector<double> l10;
    l10.reserve(D);
    Index exceed = 0;
    for (Index d = 0; d < D; ++d) {
      if (std::isnan(ln_theta(k, d))) continue;
      l10.push_back(ln_theta(k, d) / std::numbers::ln10);
      if (ln_theta(k, d) > 0.0) ++exceed;
    }
    if (l10.empty()) continue;
    s.mean_log10_theta(k) = mean_of(l10);
    s.q05(k) = sample_quantile(l10, 0.05);
    s.q95(k) = sample_quantile(l10, 0.95);
    s.p_exceed(k) = static_cast<double>(exceed) / static_cast<double>(l10.size());
  }
  if (keep_draws) s.ln_theta_draws = ln_theta;
  return s;
}

}  // namespace

PairMethod parse_pair_method(std::string_view name) {
  if (name == "analytic") return PairMethod::analytic;
  if (name == "mc" || name == "monte-carlo" || name == "monte_carlo") return PairMethod::monte_carlo;
  if (name == "conditional") return PairMethod::conditional;
  throw StructuralError("unknown pair-table method '" + std::string(name) + "'");
}

std::string_view to_string(PairMethod m) {
  switch (m) {
    case PairMethod::analytic: return "analytic";
    case PairMethod::monte_carlo: return "mc";
    case PairMethod::conditional: break;
  }
  return "conditional";
}

namespace {

std::vector<PairTable> pair_tables(const PosteriorDraws& draws, const Location& where, Index j, Index jp,
                                   PairMethod method, const PairTableOptions& options, KrigerCache& krigers) {
  const VectorXd x = where.site ? site_design(draws, *where.site) : where.design;
  if (x.size() != draws.X.cols()) throw StructuralError("location design row has the wrong length");
  const Index D = draws.size();
  std::vector<PairTable> out(D);
  switch (method) {
    case PairMethod::analytic:
      for (Index d = 0; d < D; ++d) {
        const ModelParams p = draws.params(d);
        out[d] = cell_probs(pair_latent_params(p, x, FactorMoments::prior(p.r()), j, jp));
      }
      return out;
    case PairMethod::monte_carlo:
      for (Index d = 0; d < D; ++d) {
        const ModelParams p = draws.params(d);
        const BvnParams bp = pair_latent_params(p, x, FactorMoments::prior(p.r()), j, jp);
        out[d] = kernels::mc_cell_counts_omp(bp, options.mc_draws, stream_seed(options.seed, d)).frequencies();
      }
      return out;
    case PairMethod::conditional: {
      if (where.site) {
        for (Index d = 0; d < D; ++d) {
          const ModelParams p = draws.params(d);
          if (p.W.rows() <= *where.site) throw StructuralError("conditional method needs stored factor values");
          const VectorXd w = p.W.row(*where.site).transpose();
          const BvnParams bp = pair_latent_params(p, x, w, j, jp, LatentMode::conditional);
          out[d] = product_table(bp.mu1, bp.mu2);
        }
        return out;
      }
      Coords target(1, 2);
      target.row(0) = where.coords.transpose();
      for (Index d = 0; d < D; ++d) {
        const ModelParams p = draws.params(d);
        FactorMoments wm = FactorMoments::prior(p.r());
        if (draws.config.spatial) {
          if (p.W.rows() != draws.coords.rows()) throw StructuralError("conditional method needs stored factor values");
          const FactorKriger& kr = krigers.get(p.phi);
          wm.mean = kr.mean(target, p.W).row(0).transpose();
          wm.variance = kr.variance(target)(0);
        }
        Rng rng(stream_seed(options.seed, static_cast<std::uint64_t>(d)));
        out[d] = conditional_at_point(p, wm, x, j, jp, options.kriged_samples, rng);
      }
      return out;
    }
  }
  throw StructuralError("unknown pair-table method");
}

}  // namespace

std::vector<PairTable> pair_table_draws(const PosteriorDraws& draws, const Location& where, Index j, Index jp,
                                        PairMethod method, const PairTableOptions& options) {
  require_pair(draws, j, jp);
  KrigerCache krigers(draws.coords);
  return pair_tables(draws, where, j, jp, method, options, krigers);
}

SurfaceGrid odds_surface(const PosteriorDraws& draws, const PredictionGrid& grid, Index j, Index jp,
                         const SurfaceOptions& options) {
  require_pair(draws, j, jp);
  if (grid.design.cols() != draws.X.cols()) throw StructuralError("grid design width differs from the fit");
  const Index D = draws.size();
  if (D == 0) throw StructuralError("no posterior draws");
  const Index nodes = grid.nodes.rows();

  if (options.method == PairMethod::analytic) {
    kernels::PairDrawCoefficients coef;
    coef.b1.resize(D, draws.X.cols());
    coef.b2.resize(D, draws.X.cols());
    coef.sd1.resize(D);
    coef.sd2.resize(D);
    coef.rho.resize(D);
    for (Index d = 0; d < D; ++d) {
      const auto& L = draws.Lambda[d];
      coef.b1.row(d) = draws.B[d].row(j);
      coef.b2.row(d) = draws.B[d].row(jp);
      coef.sd1(d) = std::sqrt(L.row(j).squaredNorm() + 1.0);
      coef.sd2(d) = std::sqrt(L.row(jp).squaredNorm() + 1.0);
      coef.rho(d) = j == jp ? 1.0 : std::clamp(L.row(j).dot(L.row(jp)) / (coef.sd1(d) * coef.sd2(d)), -1.0, 1.0);
    }
    const kernels::PairSurfaceValues v = options.parallel ? kernels::evaluate_pair_omp(coef, grid.design, grid.mask)
                                                          : kernels::evaluate_pair_serial(coef, grid.design, grid.mask);
    return summarize(grid, v.ln_theta, v.p11, v.p00, options.keep_draws);
  }

  MatrixXd ln_theta = MatrixXd::Constant(nodes, D, kNaN), p11 = ln_theta, p00 = ln_theta;
  KrigerCache krigers(draws.coords);
  for (Index k = 0; k < nodes; ++k) {
    if (grid.mask[k]) continue;
    PairTableOptions po = options.pair;
    po.seed = stream_seed(options.pair.seed, 0x5u, static_cast<std::uint64_t>(k));
    const auto tables = pair_tables(draws, Location::point(grid.design.row(k).transpose(), grid.nodes.row(k).transpose()),
                                    j, jp, options.method, po, krigers);
    for (Index d = 0; d < D; ++d) {
      ln_theta(k, d) = ln_theta_of(tables[d]);
      p11(k, d) = tables[d].p11 / tables[d].total();
      p00(k, d) = tables[d].p00 / tables[d].total();
    }
  }
  return summarize(grid, ln_theta, p11, p00, options.keep_draws);
}

std::vector<KrigedFactors> krige_factors(const PosteriorDraws& draws, const Coords& new_locations, std::uint64_t seed) {
  const Index D = draws.size();
  const Index m = new_locations.rows();
  std::vector<KrigedFactors> out(D);
  KrigerCache krigers(draws.coords);
  for (Index d = 0; d < D; ++d) {
    const Index r = draws.Lambda[d].cols();
    KrigedFactors& kf = out[d];
    if (draws.config.spatial) {
      if (draws.W[d].rows() != draws.coords.rows()) throw StructuralError("kriging needs stored factor values");
      const FactorKriger& kr = krigers.get(draws.phi[d]);
      kf.mean = kr.mean(new_locations, draws.W[d]);
      kf.variance = kr.variance(new_locations);
    } else {
      kf.mean = MatrixXd::Zero(m, r);
      kf.variance = VectorXd::Ones(m);
    }
    Rng rng(stream_seed(seed, 0x6u, static_cast<std::uint64_t>(d)));
    std::normal_distribution<double> normal;
    kf.sample.resize(m, r);
    for (Index h = 0; h < r; ++h) {
      for (Index i = 0; i < m; ++i) kf.sample(i, h) = kf.mean(i, h) + std::sqrt(kf.variance(i)) * normal(rng);
    }
  }
  return out;
}

RichnessSummary richness_stats(const PosteriorDraws& draws, const VectorXd& design_row) {
  if (design_row.size() != draws.X.cols()) throw StructuralError("design row has the wrong length");
  const Index D = draws.size();
  if (D == 0) throw StructuralError("no posterior draws");
  double sum_mean = 0.0, sum_mean_sq = 0.0, sum_var = 0.0, sum_ind = 0.0;
  for (Index d = 0; d < D; ++d) {
    const ModelParams p = draws.params(d);
    const LatentMarginal lm = latent_marginal(p, design_row, FactorMoments::prior(p.r()));
    const Index S = lm.mean.size();
    VectorXd pj(S);
    for (Index s = 0; s < S; ++s) pj(s) = std_normal_cdf(lm.mean(s));
    const double mean = pj.sum();
    const double ind = (pj.array() * (1.0 - pj.array())).sum();
    double cov = 0.0;
    for (Index a = 0; a < S; ++a) {
      for (Index b = a + 1; b < S; ++b) cov += bvn_cdf(lm.mean(a), lm.mean(b), lm.corr(a, b)) - pj(a) * pj(b);
    }
    sum_mean += mean;
    sum_mean_sq += mean * mean;
    sum_var += ind + 2.0 * cov;
    sum_ind += ind;
  }
  const double Dd = static_cast<double>(D);
  const double m = sum_mean / Dd;
  const double between = std::max(0.0, sum_mean_sq / Dd - m * m);
  return {m, sum_var / Dd + between, sum_ind / Dd + between};
}

RichnessSummary richness_stats(const PosteriorDraws& draws, Index site) {
  return richness_stats(draws, site_design(draws, site));
}

std::vector<OddsRatio> homogeneity_odds(const PosteriorDraws& draws, const VectorXd& design_row, Index j, Index jp) {
  require_pair(draws, j, jp);
  std::vector<OddsRatio> out;
  out.reserve(draws.size());
  for (Index d = 0; d < draws.size(); ++d) {
    const ModelParams p = draws.params(d);
    const BvnParams bp = pair_latent_params(p, design_row, FactorMoments::prior(p.r()), j, jp);
    const double l1 = log_std_normal_cdf(bp.mu1) - log_std_normal_cdf(-bp.mu1);
    const double l2 = log_std_normal_cdf(bp.mu2) - log_std_normal_cdf(-bp.mu2);
    const double lg = l1 - l2;
    if (std::isnan(lg)) throw DomainError("homogeneity odds undefined for degenerate marginals");
    if (lg == kInf) out.push_back(OddsRatio::infinite());
    else if (lg == -kInf) out.push_back(OddsRatio::zero());
    else out.push_back(OddsRatio::from_log(lg));
  }
  return out;
}

std::vector<OddsRatio> homogeneity_odds(const PosteriorDraws& draws, Index site, Index j, Index jp) {
  return homogeneity_odds(draws, site_design(draws, site), j, jp);
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw StructuralError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double g = pos - static_cast<double>(lo);
  const double a = values[lo], b = values[hi];
  if (g == 0.0 || a == b) return a;
  if (!std::isfinite(a) || !std::isfinite(b)) return g < 0.5 ? a : b;
  return a + g * (b - a);
}

}  // namespace jsdm
