#include "trader/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trader/error.hpp"
#include "trader/parallel.hpp"

namespace trader {

namespace {

constexpr Eigen::Index kCholeskyMaxP = 1000;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_dirichlet_density(const Eigen::VectorXd& x, const Eigen::VectorXd& alpha) {
  double out = std::lgamma(alpha.sum());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) return kNegInf;
    out += (alpha[i] - 1.0) * std::log(x[i]) - std::lgamma(alpha[i]);
  }
  return out;
}

Eigen::VectorXd dirichlet_concentration(const GuideSet& guide) {
  Eigen::VectorXd a(guide.n_sources() + 1);
  a.head(guide.n_sources()) = guide.theta;
  a[guide.n_sources()] = guide.zeta;
  return a;
}

// Locates the first non-positive pivot of an unblocked Cholesky; only used to
// report a failure that Eigen's LLT already detected.
long first_failing_pivot(const Eigen::MatrixXd& a) {
  const Eigen::Index p = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) return static_cast<long>(j);
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < p; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return -1;
}

Eigen::VectorXd prior_variances(const ChainState& state, double tau) {
  return state.sigma2 * tau * tau * state.lambda2.array();
}

Eigen::VectorXd residual(const ChainState& state, const Dataset& data) {
  Eigen::VectorXd r = data.y() - data.x() * state.beta;
  if (data.has_intercept()) r.array() -= state.intercept;
  return r;
}

void check_dimensions(const ChainState& state, const GuideSet& guide, Eigen::Index p) {
  if (state.beta.size() != p || state.lambda2.size() != p || guide.omega_tilde.cols() != p) {
    throw ValidationError("state, guide and data disagree on p");
  }
  if (state.eta.size() != guide.n_sources() + 1) throw ValidationError("eta length must be K + 1");
}

}  // namespace

LinearStats LinearStats::from(const Dataset& data) {
  LinearStats s;
  s.n = data.n();
  // Only the Cholesky route reads X'X; skip it when there are no rows or p is large.
  if (s.n > 0 && data.p() <= kCholeskyMaxP) s.xtx = data.x().transpose() * data.x();
  s.xty = data.x().transpose() * data.y();
  s.col_sums = data.x().colwise().sum().transpose();
  s.y_sum = data.y().sum();
  return s;
}

Eigen::VectorXd prior_mean(const GuideSet& guide, const Eigen::VectorXd& eta) {
  const Eigen::Index k = guide.n_sources();
  if (k == 0) return Eigen::VectorXd::Zero(guide.omega_tilde.cols());
  return guide.omega_tilde.transpose() * eta.head(k);
}

BetaConditional beta_conditional(const ChainState& state, const GuideSet& guide, const LinearStats& stats) {
  const Eigen::Index p = stats.xty.size();
  check_dimensions(state, guide, p);
  if (stats.n > 0 && stats.xtx.rows() != p) throw ValidationError("dense conditional needs p <= 1000");
  const Eigen::VectorXd m = prior_mean(guide, state.eta);
  const Eigen::VectorXd d = prior_variances(state, guide.tau);

  BetaConditional out;
  out.precision = stats.n > 0 ? Eigen::MatrixXd(stats.xtx / state.sigma2) : Eigen::MatrixXd::Zero(p, p);
  out.precision.diagonal().array() += d.array().inverse();
  // mean = m + P^{-1} X'(y - intercept - X m) / sigma2
  Eigen::VectorXd rhs = stats.xty;
  if (stats.n > 0) rhs -= stats.xtx * m;
  if (state.intercept != 0.0) rhs -= state.intercept * stats.col_sums;
  rhs /= state.sigma2;
  Eigen::LLT<Eigen::MatrixXd> llt(out.precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("beta precision is not positive definite", first_failing_pivot(out.precision));
  }
  out.mean = m + llt.solve(rhs);
  return out;
}

Eigen::VectorXd sample_beta_conditional(const ChainState& state, const GuideSet& guide, const Dataset& data,
                                        const LinearStats& stats, Rng& rng) {
  const Eigen::Index p = data.p();
  check_dimensions(state, guide, p);
  const Eigen::VectorXd m = prior_mean(guide, state.eta);
  const Eigen::VectorXd d = prior_variances(state, guide.tau);
  if (!d.allFinite() || (d.array() <= 0.0).any()) {
    const Eigen::Index n = d.size();
    Eigen::Index bad = 0;
    while (bad < n && std::isfinite(d[bad]) && d[bad] > 0.0) ++bad;
    throw NumericalError("degenerate prior variance for beta", static_cast<long>(bad));
  }
  const double intercept = data.has_intercept() ? state.intercept : 0.0;

  if (data.n() == 0) {
    return m + (d.array().sqrt() * rng.normal_vector(p).array()).matrix();
  }

  if (p <= kCholeskyMaxP) {
    Eigen::MatrixXd precision = stats.xtx / state.sigma2;
    precision.diagonal().array() += d.array().inverse();
    Eigen::VectorXd rhs = stats.xty - stats.xtx * m;
    if (intercept != 0.0) rhs -= intercept * stats.col_sums;
    rhs /= state.sigma2;
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("beta precision is not positive definite", first_failing_pivot(precision));
    }
    Eigen::VectorXd draw = llt.solve(rhs);
    draw += llt.matrixU().solve(rng.normal_vector(p));
    return m + draw;
  }

  // n-dimensional route: u ~ N(0, D), v = Phi u + delta, w solves
  // (Phi D Phi' + I) w = alpha - v, draw = u + D Phi' w.
  const double sigma = std::sqrt(state.sigma2);
  const Eigen::MatrixXd phi = data.x() / sigma;
  Eigen::VectorXd target = data.y() - data.x() * m;
  if (intercept != 0.0) target.array() -= intercept;
  target /= sigma;
  const Eigen::VectorXd u = (d.array().sqrt() * rng.normal_vector(p).array()).matrix();
  const Eigen::VectorXd v = phi * u + rng.normal_vector(data.n());
  Eigen::MatrixXd gram = phi * d.asDiagonal() * phi.transpose();
  gram.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("n-dimensional system is not positive definite", -1);
  const Eigen::VectorXd w = llt.solve(target - v);
  return m + u + d.asDiagonal() * (phi.transpose() * w);
}

Eigen::VectorXd sample_beta_conditional(const ChainState& state, const GuideSet& guide, const Dataset& data,
                                        Rng& rng) {
  return sample_beta_conditional(state, guide, data, LinearStats::from(data), rng);
}

double sample_intercept_conditional(const ChainState& state, const LinearStats& stats, Rng& rng) {
  if (stats.n < 1) throw ValidationError("intercept update needs at least one row");
  const auto n = static_cast<double>(stats.n);
  const double mean = (stats.y_sum - stats.col_sums.dot(state.beta)) / n;
  return mean + std::sqrt(state.sigma2 / n) * rng.normal();
}

LocalScales sample_lambda_conditional(const ChainState& state, const GuideSet& guide, Rng& rng) {
  const Eigen::VectorXd r = state.beta - prior_mean(guide, state.eta);
  const double scale = 2.0 * state.sigma2 * guide.tau * guide.tau;
  LocalScales out{Eigen::VectorXd(r.size()), Eigen::VectorXd(r.size())};
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    const double rate = 1.0 / state.aux_nu[j] + r[j] * r[j] / scale;
    if (!std::isfinite(rate)) throw NumericalError("non-finite rate for lambda", static_cast<long>(j));
    out.lambda2[j] = rng.inverse_gamma(1.0, rate);
    out.aux_nu[j] = rng.inverse_gamma(1.0, 1.0 + 1.0 / out.lambda2[j]);
  }
  return out;
}

double sample_sigma2_conditional(const ChainState& state, const GuideSet& guide, const Dataset& data,
                                 const SamplerSettings& settings, Rng& rng) {
  const auto n = static_cast<double>(data.n());
  const auto p = static_cast<double>(data.p());
  double rate = settings.nu;
  if (data.n() > 0) rate += 0.5 * residual(state, data).squaredNorm();
  if (data.p() > 0) {
    const Eigen::VectorXd r = state.beta - prior_mean(guide, state.eta);
    rate += 0.5 * (r.array().square() / state.lambda2.array()).sum() / (guide.tau * guide.tau);
  }
  if (!(rate > 0.0) || !std::isfinite(rate)) throw NumericalError("non-positive rate for sigma2");
  return rng.inverse_gamma(settings.nu + 0.5 * n + 0.5 * p, rate);
}

double eta_log_target(const ChainState& state, const GuideSet& guide, const Eigen::VectorXd& eta) {
  const Eigen::VectorXd alpha = dirichlet_concentration(guide);
  double out = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (!(eta[i] > 0.0)) return kNegInf;
    out += (alpha[i] - 1.0) * std::log(eta[i]);
  }
  const Eigen::VectorXd r = state.beta - prior_mean(guide, eta);
  const double scale = 2.0 * state.sigma2 * guide.tau * guide.tau;
  out -= (r.array().square() / state.lambda2.array()).sum() / scale;
  return out;
}

double eta_log_accept_ratio(const ChainState& state, const GuideSet& guide, const SamplerSettings& settings,
                            const Eigen::VectorXd& proposal) {
  const double c = settings.eta_proposal_concentration;
  const double eps = settings.eta_proposal_floor;
  const Eigen::VectorXd forward = (c * state.eta.array() + eps).matrix();
  const Eigen::VectorXd backward = (c * proposal.array() + eps).matrix();
  const double target_new = eta_log_target(state, guide, proposal);
  if (target_new == kNegInf) return kNegInf;
  return target_new - eta_log_target(state, guide, state.eta) + log_dirichlet_density(state.eta, backward) -
         log_dirichlet_density(proposal, forward);
}

EtaStep sample_eta_mh(const ChainState& state, const GuideSet& guide, const SamplerSettings& settings, Rng& rng) {
  if (guide.n_sources() == 0) return {state.eta, false, 0.0};
  const Eigen::VectorXd forward =
      (settings.eta_proposal_concentration * state.eta.array() + settings.eta_proposal_floor).matrix();
  const Eigen::VectorXd proposal = rng.dirichlet(forward);
  const double log_ratio = eta_log_accept_ratio(state, guide, settings, proposal);
  const double log_u = std::log(rng.uniform());
  if (log_u < log_ratio) return {proposal, true, log_ratio};
  return {state.eta, false, log_ratio};
}

void gibbs_sweep(ChainState& state, const GuideSet& guide, const Dataset& data, const LinearStats& stats,
                 const SamplerSettings& settings, Rng& rng) {
  state.beta = sample_beta_conditional(state, guide, data, stats, rng);
  if (data.has_intercept()) state.intercept = sample_intercept_conditional(state, stats, rng);
  LocalScales scales = sample_lambda_conditional(state, guide, rng);
  state.lambda2 = std::move(scales.lambda2);
  state.aux_nu = std::move(scales.aux_nu);
  state.eta = sample_eta_mh(state, guide, settings, rng).eta;
  state.sigma2 = sample_sigma2_conditional(state, guide, data, settings, rng);
}

ChainState initial_state(const Dataset& data, const GuideSet& guide) {
  const Eigen::Index p = data.p();
  ChainState s;
  const Eigen::VectorXd alpha = dirichlet_concentration(guide);
  s.eta = alpha / alpha.sum();
  s.beta = prior_mean(guide, s.eta);
  s.lambda2 = Eigen::VectorXd::Ones(p);
  s.aux_nu = Eigen::VectorXd::Ones(p);
  s.sigma2 = 1.0;
  if (data.n() > 1) {
    const double mean = data.y().mean();
    const double var = (data.y().array() - mean).square().sum() / static_cast<double>(data.n() - 1);
    if (var > 0.0 && std::isfinite(var)) s.sigma2 = var;
  }
  s.intercept = data.has_intercept() && data.n() > 0 ? data.y().mean() : 0.0;
  return s;
}

PosteriorDraws run_chain(const Dataset& train, const GuideSet& guide, const TraderConfig& config, int chain_id,
                         std::uint64_t seed) {
  config.validate();
  if (guide.omega_tilde.cols() != train.p()) throw ValidationError("guide and data disagree on p");
  const Eigen::Index p = train.p();
  const Eigen::Index k1 = guide.n_sources() + 1;
  const SamplerSettings settings = SamplerSettings::from(config);
  const LinearStats stats = LinearStats::from(train);
  const std::uint64_t chain_seed = derive_seed(seed, {stream_tag("chain"), static_cast<std::uint64_t>(chain_id)});
  Rng rng(chain_seed);
  ChainState state = initial_state(train, guide);

  PosteriorDraws out;
  const Eigen::Index s = config.n_samples;
  out.beta.resize(s, p);
  out.lambda.resize(s, p);
  out.eta.resize(s, k1);
  out.sigma2.resize(s);
  if (train.has_intercept()) out.intercept.resize(s);
  out.tau = guide.tau;
  out.chain_id = chain_id;
  out.seed = chain_seed;
  out.config_digest = config.digest();

  const long total = static_cast<long>(config.n_warmup) + static_cast<long>(config.n_samples);
  for (long it = 0; it < total; ++it) {
    try {
      gibbs_sweep(state, guide, train, stats, settings, rng);
    } catch (const NumericalError& e) {
      throw NumericalError("chain " + std::to_string(chain_id) + " failed at iteration " + std::to_string(it) + ": " +
                               e.what(),
                           it);
    }
    const long keep = it - config.n_warmup;
    if (keep < 0) continue;
    out.beta.row(keep) = state.beta.transpose();
    out.lambda.row(keep) = state.lambda2.array().sqrt().matrix().transpose();
    out.eta.row(keep) = state.eta.transpose();
    out.sigma2[keep] = state.sigma2;
    if (train.has_intercept()) out.intercept[keep] = state.intercept;
  }
  out.validate();
  return out;
}

namespace {

std::vector<PosteriorDraws> run_chains(const Dataset& data, const GuideSet& guide, const TraderConfig& config,
                                       int jobs) {
  std::vector<PosteriorDraws> chains(static_cast<std::size_t>(config.n_chains));
  parallel_for(chains.size(), jobs, [&](std::size_t c) {
    chains[c] = run_chain(data, guide, config, static_cast<int>(c), config.seed);
  });
  return chains;
}

}  // namespace

FitResult fit_horseshoe(const Dataset& data, const TraderConfig& config, int jobs) {
  config.validate();
  const double tau = config.tau_override ? *config.tau_override
                                         : select_tau(data.p(), data.n(), config.psi_hat_for(data.p()));
  FitResult out;
  out.guide = GuideSet::empty(data.p(), tau, config.zeta);
  out.chains = run_chains(data, out.guide, config, jobs);
  out.summary = summarize(out.chains, config.ci_level);
  out.n_fit_rows = data.n();
  return out;
}

FitResult fit_trader(const Dataset& data, const std::vector<SourceEstimate>& sources, const TraderConfig& config,
                     int jobs) {
  config.validate();
  if (sources.empty()) return fit_horseshoe(data, config, jobs);
  for (const auto& s : sources) {
    if (s.omega_hat.size() != data.p()) throw ValidationError("length mismatch: " + s.id);
  }
  auto [train, val] = split_validation(data, config.validation_fraction,
                                       derive_seed(config.seed, {stream_tag("validation_split")}));
  const Eigen::VectorXd beta_val = estimate_beta_val(val, config);
  FitResult out;
  out.guide = build_guide(sources, beta_val, config, train.n());
  out.chains = run_chains(train, out.guide, config, jobs);
  out.summary = summarize(out.chains, config.ci_level);
  out.n_fit_rows = train.n();
  return out;
}

double kappa(double tau, double lambda, double n0) { return 1.0 / (1.0 + tau * tau * lambda * lambda * n0); }

double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PosteriorSummary summarize(const std::vector<PosteriorDraws>& chains, double level) {
  if (chains.empty()) throw ValidationError("no chains to summarize");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("credible level must lie in (0,1)");
  const Eigen::Index p = chains.front().p();
  Eigen::Index total = 0;
  for (const auto& c : chains) {
    if (c.p() != p) throw ValidationError("chains disagree on p");
    total += c.n_draws();
  }
  if (total < 2) throw ValidationError("need at least two draws to summarize");
  const double alpha = 1.0 - level;
  PosteriorSummary out;
  out.level = level;
  out.coef.resize(static_cast<std::size_t>(p));
  std::vector<double> pooled(static_cast<std::size_t>(total));
  for (Eigen::Index j = 0; j < p; ++j) {
    std::size_t i = 0;
    double sum = 0.0;
    for (const auto& c : chains) {
      for (Eigen::Index s = 0; s < c.n_draws(); ++s) {
        pooled[i++] = c.beta(s, j);
        sum += c.beta(s, j);
      }
    }
    std::sort(pooled.begin(), pooled.end());
    CoefficientSummary& cs = out.coef[static_cast<std::size_t>(j)];
    cs.mean = sum / static_cast<double>(total);
    cs.median = sorted_quantile(pooled, 0.5);
    cs.lower = sorted_quantile(pooled, alpha / 2.0);
    cs.upper = sorted_quantile(pooled, 1.0 - alpha / 2.0);
    cs.selected = cs.lower > 0.0 || cs.upper < 0.0;
  }
  return out;
}

std::string summary_csv(const PosteriorSummary& summary) {
  std::string out = "coef,mean,median,lower,upper,selected\n";
  for (std::size_t j = 0; j < summary.coef.size(); ++j) {
    const auto& c = summary.coef[j];
    out += std::to_string(j + 1) + "," + format_real(c.mean) + "," + format_real(c.median) + "," +
           format_real(c.lower) + "," + format_real(c.upper) + "," + (c.selected ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace trader
