// Acceptance harness: prints one PASS/FAIL line per criterion, with indented
// detail lines underneath. `--criterion N` runs a single criterion.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>

#include "oracles.hpp"
#include "trader/error.hpp"
#include "trader/evalbench.hpp"
#include "trader/guide.hpp"
#include "trader/sampler.hpp"
#include "trader/simgen.hpp"

using namespace trader;
namespace bm = boost::math;

namespace {

struct Options {
  int warmup = 2000;
  int samples = 2000;
  int chains = 4;
  int source_warmup = 1000;
  int source_samples = 1000;
  int source_chains = 1;
  int reps = 50;
  int jobs = 1;
  std::uint64_t seed = 20240601;
};

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void info(const std::string& what) { details.push_back("info " + what); }
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index n, Eigen::Index p, std::mt19937_64& eng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = z(eng);
  }
  return x;
}

// Criterion 1: conjugate subcase. With lambda, eta and tau frozen the posterior
// mean of beta is the closed-form Gaussian-conditional mean (it does not depend
// on sigma2), so the Gibbs beta/sigma2 chain must average to it.
Outcome criterion1(const Options& opt) {
  Outcome out;
  std::mt19937_64 eng(opt.seed + 1);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::Index n = 80, p = 200;
  const Eigen::MatrixXd x = gaussian_matrix(n, p, eng);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta.head(20).setConstant(0.5);
  Eigen::VectorXd y = x * beta;
  for (Eigen::Index i = 0; i < n; ++i) y[i] += z(eng);
  const Dataset data = Dataset::create(x, y);

  GuideSet guide;
  guide.omega_tilde.resize(2, p);
  for (Eigen::Index k = 0; k < 2; ++k) {
    for (Eigen::Index j = 0; j < p; ++j) guide.omega_tilde(k, j) = beta[j] + 0.1 * z(eng);
  }
  guide.theta = Eigen::Vector2d(0.8, 0.5);
  guide.beta_val = beta;
  guide.scale_factors = Eigen::Vector2d::Ones();
  guide.tau = select_tau(p, n, 100.0);

  ChainState state;
  state.lambda2.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double lam = std::tan(M_PI * u(eng) / 2.0);
    state.lambda2[j] = lam * lam;
  }
  state.aux_nu = Eigen::VectorXd::Ones(p);
  state.eta = Eigen::Vector3d(0.5, 0.3, 0.2);
  state.beta = prior_mean(guide, state.eta);
  state.sigma2 = 1.0;

  const auto oracle =
      oracle::dense_beta_conditional(x, y, 0.0, 1.0, guide.tau, state.lambda2, prior_mean(guide, state.eta));

  Rng rng(opt.seed + 11);
  const LinearStats stats = LinearStats::from(data);
  const SamplerSettings settings;
  const int burn = 500, keep = 20000;
  std::vector<std::vector<double>> trace(static_cast<std::size_t>(p));
  for (int it = 0; it < burn + keep; ++it) {
    state.beta = sample_beta_conditional(state, guide, data, stats, rng);
    state.sigma2 = sample_sigma2_conditional(state, guide, data, settings, rng);
    if (it < burn) continue;
    for (Eigen::Index j = 0; j < p; ++j) trace[static_cast<std::size_t>(j)].push_back(state.beta[j]);
  }
  int exceed = 0;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& t = trace[static_cast<std::size_t>(j)];
    const double zj = (oracle::mean(t) - oracle.mean[j]) / oracle::batch_means_mcse(t, 100);
    worst = std::max(worst, std::abs(zj));
    exceed += std::abs(zj) > 3.0;
  }
  out.check(exceed == 0, fmt("all %ld coordinates within 3 MCSE of the closed-form mean (exceeding: %d, max |z| %.3f)",
                             static_cast<long>(p), exceed, worst));
  out.info(fmt("expected count beyond 3 MCSE for a correct sampler: %.2f", p * 0.0027));
  return out;
}

// Criterion 2: orthogonal-design identity between the conditional mean and the
// kappa-weighted average of least squares and the prior mean.
Outcome criterion2(const Options& opt) {
  Outcome out;
  std::mt19937_64 eng(opt.seed + 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  const Eigen::Index n = 120, p = 100;
  const double n0 = static_cast<double>(n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(n, p, eng));
  const Eigen::MatrixXd x = std::sqrt(n0) * (qr.householderQ() * Eigen::MatrixXd::Identity(n, p));
  const double orth = (x.transpose() * x - n0 * Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = z(eng);
  const Dataset data = Dataset::create(x, y);
  const LinearStats stats = LinearStats::from(data);
  const Eigen::VectorXd ols = x.transpose() * y / n0;

  double worst_lib = 0.0, worst_dense = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    GuideSet guide;
    guide.omega_tilde = gaussian_matrix(3, p, eng);
    guide.theta = Eigen::Vector3d(0.2, 0.5, 0.9);
    guide.beta_val = guide.omega_tilde.row(0).transpose();
    guide.scale_factors = Eigen::Vector3d::Ones();
    guide.tau = std::exp(3.0 * z(eng)) * 0.1;
    ChainState s;
    s.beta = Eigen::VectorXd::Zero(p);
    s.lambda2.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) s.lambda2[j] = std::pow(std::tan(M_PI * u(eng) / 2.0), 2);
    s.aux_nu = Eigen::VectorXd::Ones(p);
    s.sigma2 = std::exp(z(eng));
    Eigen::Vector4d g(u(eng), u(eng), u(eng), u(eng));
    s.eta = g / g.sum();
    const Eigen::VectorXd m = prior_mean(guide, s.eta);
    Eigen::VectorXd convex(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double k = kappa(guide.tau, std::sqrt(s.lambda2[j]), n0);
      convex[j] = (1.0 - k) * ols[j] + k * m[j];
    }
    const BetaConditional bc = beta_conditional(s, guide, stats);
    const auto dense = oracle::dense_beta_conditional(x, y, 0.0, s.sigma2, guide.tau, s.lambda2, m);
    worst_lib = std::max(worst_lib, (bc.mean - convex).cwiseAbs().maxCoeff());
    worst_dense = std::max(worst_dense, (dense.mean - convex).cwiseAbs().maxCoeff());
  }
  out.info(fmt("max |X'X - n0 I| = %.3g", orth));
  out.check(worst_lib <= 1e-8, fmt("sampler conditional mean vs kappa-weighted average: max error %.3g (<= 1e-8)", worst_lib));
  out.check(worst_dense <= 1e-8, fmt("dense precision-form oracle vs kappa-weighted average: max error %.3g (<= 1e-8)",
                                     worst_dense));
  return out;
}

// Criterion 3: tau selection is a fixed point of the expected informative count.
Outcome criterion3(const Options&) {
  Outcome out;
  double worst = 0.0;
  bool exact = true;
  for (int p : {10, 50, 200, 1000, 5000}) {
    for (int n0 : {1, 7, 40, 120, 10000}) {
      for (int i = 1; i <= 100; ++i) {
        const double psi = p * i / 101.0;
        const double back = expected_informative_count(select_tau(p, n0, psi), p, n0);
        worst = std::max(worst, std::abs(back - psi) / psi);
      }
      exact = exact && select_tau(p, n0, p / 2.0) == 1.0 / std::sqrt(static_cast<double>(n0));
    }
  }
  out.check(worst <= 1e-12, fmt("E(psi | tau(psi)) = psi over 100-point grids: max relative error %.3g (<= 1e-12)", worst));
  out.check(exact, "psi = p/2 gives tau = 1/sqrt(n0) exactly");
  return out;
}

// Criterion 4: Geweke joint-distribution test on n=5, p=3, K=1.
Outcome criterion4(const Options& opt) {
  Outcome out;
  const Eigen::Index n = 5, p = 3;
  const double nu = 3.0;  // proper sigma2 prior so every test function has finite moments
  std::mt19937_64 eng(opt.seed + 4);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::MatrixXd x = gaussian_matrix(n, p, eng);

  GuideSet guide;
  guide.omega_tilde.resize(1, p);
  guide.omega_tilde << 1.0, -0.5, 0.25;
  guide.theta = Eigen::VectorXd::Constant(1, 0.6);
  guide.zeta = 1.0;
  guide.beta_val = guide.omega_tilde.row(0).transpose();
  guide.scale_factors = Eigen::VectorXd::Ones(1);
  guide.tau = 1.0;

  auto features = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& lambda2, double s2, const Eigen::VectorXd& eta,
                      const Eigen::VectorXd& y) {
    std::vector<double> f;
    for (Eigen::Index j = 0; j < p; ++j) f.push_back(std::atan(b[j]));
    for (Eigen::Index j = 0; j < p; ++j) f.push_back(std::pow(std::atan(b[j]), 2));
    for (Eigen::Index j = 0; j < p; ++j) f.push_back(std::atan(std::sqrt(lambda2[j])));
    f.push_back(eta[0]);
    f.push_back(eta[0] * eta[0]);
    f.push_back(std::log(s2));
    f.push_back(std::log(s2) * std::log(s2));
    f.push_back(1.0 / s2);
    f.push_back(std::atan(b[0] * b[1]));
    for (Eigen::Index i = 0; i < 3; ++i) f.push_back(std::tanh(y[i]));
    f.push_back(std::atan(b.sum()));
    f.push_back(eta[0] * std::atan(b[0]));
    return f;
  };

  // Marginal-conditional simulator: independent draws from the prior and likelihood.
  auto prior_draw = [&](Eigen::VectorXd& b, Eigen::VectorXd& lambda2, double& s2, Eigen::VectorXd& eta,
                        Eigen::VectorXd& y) {
    std::gamma_distribution<double> g1(guide.theta[0], 1.0), g2(guide.zeta, 1.0), gs(nu, 1.0);
    const double a = g1(eng), c = g2(eng);
    eta = Eigen::Vector2d(a / (a + c), c / (a + c));
    s2 = nu / gs(eng);
    lambda2.resize(p);
    b.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double lam = std::tan(M_PI * u(eng) / 2.0);
      lambda2[j] = lam * lam;
      b[j] = eta[0] * guide.omega_tilde(0, j) + std::sqrt(s2) * guide.tau * lam * z(eng);
    }
    y = x * b;
    for (Eigen::Index i = 0; i < n; ++i) y[i] += std::sqrt(s2) * z(eng);
  };

  const int draws = 100000;
  const std::size_t nf = 20;
  std::vector<std::vector<double>> fm(nf), fs(nf);
  Eigen::VectorXd b, lambda2, eta, y;
  double s2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    prior_draw(b, lambda2, s2, eta, y);
    const auto f = features(b, lambda2, s2, eta, y);
    for (std::size_t k = 0; k < nf; ++k) fm[k].push_back(f[k]);
  }

  // Successive-conditional simulator: Gibbs sweep given y, then y given parameters.
  prior_draw(b, lambda2, s2, eta, y);
  ChainState state;
  state.beta = b;
  state.lambda2 = lambda2;
  state.aux_nu = Eigen::VectorXd::Ones(p);
  state.sigma2 = s2;
  state.eta = eta;
  Rng rng(opt.seed + 44);
  SamplerSettings settings;
  settings.nu = nu;
  const int burn = 2000;
  for (int it = 0; it < burn + draws; ++it) {
    const Dataset data = Dataset::create(x, y);
    gibbs_sweep(state, guide, data, LinearStats::from(data), settings, rng);
    y = x * state.beta;
    for (Eigen::Index i = 0; i < n; ++i) y[i] += std::sqrt(state.sigma2) * rng.normal();
    if (it < burn) continue;
    const auto f = features(state.beta, state.lambda2, state.sigma2, state.eta, y);
    for (std::size_t k = 0; k < nf; ++k) fs[k].push_back(f[k]);
  }

  double worst = 0.0;
  std::string zs;
  for (std::size_t k = 0; k < nf; ++k) {
    const double se_m = std::sqrt(oracle::variance(fm[k]) / draws);
    const double se_s = oracle::batch_means_mcse(fs[k], 100);
    const double zk = (oracle::mean(fm[k]) - oracle::mean(fs[k])) / std::sqrt(se_m * se_m + se_s * se_s);
    worst = std::max(worst, std::abs(zk));
    zs += fmt("%s%.2f", k ? " " : "", zk);
  }
  out.info("z = " + zs);
  out.check(worst < 4.0, fmt("Geweke |z| < 4 across %zu test functions (max %.3f)", nf, worst));
  return out;
}

TraderConfig bench_config(const Options& opt) {
  TraderConfig c;
  c.n_warmup = opt.warmup;
  c.n_samples = opt.samples;
  c.n_chains = opt.chains;
  return c;
}

struct MethodStats {
  std::map<int, double> mse_all, width_all, cover_signal, width_signal;
};

std::map<std::string, MethodStats> collect(const BenchmarkResult& r) {
  std::map<std::string, MethodStats> out;
  for (const auto& row : r.rows) {
    auto& m = out[row.method];
    if (row.stratum == Stratum::All) {
      m.mse_all[row.replication] = row.mse;
      m.width_all[row.replication] = row.avg_width;
    } else if (row.stratum == Stratum::Signal) {
      m.cover_signal[row.replication] = row.coverage;
      m.width_signal[row.replication] = row.avg_width;
    }
  }
  return out;
}

double mean_of(const std::map<int, double>& m) {
  double s = 0.0;
  for (const auto& [k, v] : m) s += v;
  return m.empty() ? std::nan("") : s / static_cast<double>(m.size());
}

BenchmarkResult bench(const SimSpec& spec, const std::set<std::string>& methods, const Options& opt,
                      std::uint64_t seed, Outcome& out, const std::string& label) {
  BenchmarkOptions bo;
  bo.jobs = opt.jobs;
  TraderConfig sc = bench_config(opt);
  sc.n_warmup = opt.source_warmup;
  sc.n_samples = opt.source_samples;
  sc.n_chains = opt.source_chains;
  bo.source_config = sc;
  const BenchmarkResult r = run_benchmark(spec, methods, opt.reps, bench_config(opt), seed, bo);
  out.check(r.failures.empty(), fmt("%s: %d replications, %zu failed; %ld retained draws passed the simplex and positivity "
                                    "invariants (%.0f s)",
                                    label.c_str(), opt.reps, r.failures.size(), r.draws_checked, r.wall_seconds));
  for (const auto& f : r.failures) out.info(fmt("replication %d failed: %s", f.replication, f.message.c_str()));
  return r;
}

// Criterion 5: Setting I, all sources informative.
Outcome criterion5(const Options& opt) {
  Outcome out;
  SimSpec spec;
  spec.setting = Setting::I;
  const BenchmarkResult r = bench(spec, {"trader", "horseshoe"}, opt, opt.seed + 5, out, "setting I");
  auto m = collect(r);
  const auto& tr = m["trader"];
  const auto& hs = m["horseshoe"];
  int wins = 0, total = 0;
  for (const auto& [rep, v] : tr.mse_all) {
    if (!hs.mse_all.count(rep)) continue;
    ++total;
    wins += v < hs.mse_all.at(rep);
  }
  const double frac = total ? static_cast<double>(wins) / total : 0.0;
  out.check(frac >= 0.90, fmt("(a) TRADER MSE < horseshoe MSE in %d/%d replications (%.1f%%, need >= 90%%)", wins, total,
                              100 * frac));
  const double ct = mean_of(tr.cover_signal), ch = mean_of(hs.cover_signal);
  out.check(ct >= 0.90, fmt("(b) TRADER signal coverage %.4f (>= 0.90)", ct));
  out.check(ch <= ct - 0.05, fmt("(b) horseshoe signal coverage %.4f, %.1f points below TRADER (need >= 5)", ch,
                                 100 * (ct - ch)));
  const double wt = mean_of(tr.width_all), wh = mean_of(hs.width_all);
  out.check(wt < wh, fmt("(c) mean interval width TRADER %.4f < horseshoe %.4f", wt, wh));
  out.info(fmt("mean MSE TRADER %.5f, horseshoe %.5f; signal width TRADER %.4f, horseshoe %.4f", mean_of(tr.mse_all),
               mean_of(hs.mse_all), mean_of(tr.width_signal), mean_of(hs.width_signal)));
  return out;
}

// Criterion 6: Setting II robustness to uninformative sources.
Outcome criterion6(const Options& opt) {
  Outcome out;
  SimSpec spec;
  spec.setting = Setting::II;
  spec.K_a = 2;
  const auto r2 = collect(bench(spec, {"trader", "horseshoe"}, opt, opt.seed + 6, out, "setting II, K_a = 2"));
  spec.K_a = 8;
  const auto r8 = collect(bench(spec, {"trader"}, opt, opt.seed + 6, out, "setting II, K_a = 8"));
  const double t2 = mean_of(r2.at("trader").mse_all), t8 = mean_of(r8.at("trader").mse_all);
  const double h2 = mean_of(r2.at("horseshoe").mse_all);
  out.check(t8 < t2, fmt("mean TRADER MSE at K_a = 8 (%.5f) < at K_a = 2 (%.5f)", t8, t2));
  out.check(t2 <= 1.10 * h2, fmt("at K_a = 2, TRADER MSE %.5f <= 1.10 x horseshoe %.5f (ratio %.3f)", t2, h2, t2 / h2));
  return out;
}

// Criterion 7: Setting III(iii), weakly correlated sources on the target scale.
Outcome criterion7(const Options& opt) {
  Outcome out;
  SimSpec spec;
  spec.setting = Setting::III;
  spec.scale_ratios.assign(10, 1.0);
  spec.correlations.assign(10, 0.2);
  const auto r = collect(bench(spec, {"trader", "horseshoe"}, opt, opt.seed + 7, out, "setting III(iii)"));
  const double t = mean_of(r.at("trader").mse_all), h = mean_of(r.at("horseshoe").mse_all);
  out.check(t <= 1.05 * h, fmt("TRADER mean MSE %.5f <= 1.05 x horseshoe %.5f (ratio %.3f)", t, h, t / h));
  return out;
}

// Criterion 8: Setting III(i), strongly correlated sources on varying scales.
Outcome criterion8(const Options& opt) {
  Outcome out;
  SimSpec spec;
  spec.setting = Setting::III;
  spec.joint = Setting3Joint::Pairwise;
  spec.scale_ratios = setting3_scale_ratios_i();
  spec.correlations.assign(10, 0.7);
  const auto r10 = collect(bench(spec, {"trader", "horseshoe"}, opt, opt.seed + 8, out, "setting III(i), K = 10"));
  spec.K = 1;
  spec.scale_ratios.resize(1);
  spec.correlations.resize(1);
  const auto r1 = collect(bench(spec, {"trader"}, opt, opt.seed + 8, out, "setting III(i), K = 1"));
  const double t10 = mean_of(r10.at("trader").mse_all), t1 = mean_of(r1.at("trader").mse_all);
  const double h = mean_of(r10.at("horseshoe").mse_all);
  out.check(t10 < t1, fmt("TRADER mean MSE at K = 10 (%.5f) < at K = 1 (%.5f)", t10, t1));
  out.check(t1 < h, fmt("TRADER mean MSE at K = 1 (%.5f) < horseshoe (%.5f)", t1, h));
  return out;
}

bool same_draws(const std::vector<PosteriorDraws>& a, const std::vector<PosteriorDraws>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].beta == b[i].beta && a[i].sigma2 == b[i].sigma2 && a[i].lambda == b[i].lambda && a[i].eta == b[i].eta &&
          a[i].intercept == b[i].intercept)) {
      return false;
    }
  }
  return true;
}

// Criterion 9: reductions, invariances and determinism.
Outcome criterion9(const Options& opt) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  TraderConfig config;
  config.n_warmup = 500;
  config.n_samples = 500;
  config.n_chains = 2;
  config.seed = opt.seed + 9;
  long checked = 0;
  bool reduction = true, scale_exact = true, scale_close = true, jobs_same = true;
  double guide_gap = 0.0;
  for (int setting = 1; setting <= 3; ++setting) {
    SimSpec spec;
    spec.setting = static_cast<Setting>(setting);
    spec.K = 4;
    if (setting == 2) spec.K_a = 2;
    if (setting == 3) {
      spec.scale_ratios = {1.0, 1.3, 1.6, 2.0};
      spec.correlations = {0.7, 0.5, 0.3, 0.2};
      spec.joint = Setting3Joint::Pairwise;
    }
    const SimInstance inst = generate(spec, opt.seed + 90 + setting);
    const auto sources = estimate_sources(inst, config, opt.seed + 99, &checked);

    const FitResult hs = fit_horseshoe(inst.target, config);
    const FitResult t0 = fit_trader(inst.target, {}, config);
    reduction = reduction && same_draws(hs.chains, t0.chains) && summary_csv(hs.summary) == summary_csv(t0.summary);

    const FitResult base = fit_trader(inst.target, sources, config);
    auto scaled = sources;
    const double pow2[] = {0.25, 8.0, 0.5, 1024.0};
    for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k].omega_hat *= pow2[k % 4];
    const FitResult s2 = fit_trader(inst.target, scaled, config);
    scale_exact = scale_exact && same_draws(base.chains, s2.chains) && base.guide.theta == s2.guide.theta &&
                  base.guide.omega_tilde == s2.guide.omega_tilde;
    auto arbitrary = sources;
    const double fac[] = {1e-3, 3.7, 0.61, 42.0};
    for (std::size_t k = 0; k < arbitrary.size(); ++k) arbitrary[k].omega_hat *= fac[k % 4];
    const FitResult sa = fit_trader(inst.target, arbitrary, config);
    const double gap = std::max((base.guide.omega_tilde - sa.guide.omega_tilde).cwiseAbs().maxCoeff() /
                                    base.guide.beta_val.norm(),
                                (base.guide.theta - sa.guide.theta).cwiseAbs().maxCoeff());
    guide_gap = std::max(guide_gap, gap);
    scale_close = scale_close && gap <= 1e-12;

    const FitResult par = fit_trader(inst.target, sources, config, 2);
    jobs_same = jobs_same && same_draws(base.chains, par.chains);

    for (const auto* f : {&hs, &t0, &base, &s2, &sa, &par}) {
      for (const auto& c : f->chains) {
        c.validate();
        checked += c.n_draws();
      }
    }
  }
  out.check(reduction, "K = 0: fit_trader draws and summary are bitwise equal to fit_horseshoe (settings I-III)");
  out.check(scale_exact, "power-of-two source rescaling: GuideSet and full draw sequence bitwise unchanged");
  out.check(scale_close, fmt("arbitrary positive source rescaling: GuideSet unchanged to %.2g (<= 1e-12)", guide_gap));
  out.check(jobs_same, "chains run with 1 or 2 workers give bitwise-identical draws");

  SimSpec tiny;
  tiny.n0 = tiny.nk = 40;
  tiny.p = 20;
  tiny.s = 4;
  tiny.K = 3;
  tiny.h = 2;
  TraderConfig small = config;
  small.n_warmup = small.n_samples = 200;
  small.n_chains = 1;
  BenchmarkOptions one, three;
  three.jobs = 3;
  const auto b1 = run_benchmark(tiny, {"trader", "horseshoe"}, 4, small, 5, one);
  const auto b3 = run_benchmark(tiny, {"trader", "horseshoe"}, 4, small, 5, three);
  out.check(metrics_csv(b1.rows) == metrics_csv(b3.rows), "benchmark with --jobs 1 and --jobs 3: identical metrics");
  checked += b1.draws_checked + b3.draws_checked;
  out.check(true, fmt("simplex and positivity invariants held on %ld retained draws", checked));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.check(secs < 300.0, fmt("runtime %.1f s (< 300 s)", secs));
  return out;
}

// Criterion 10: KS tests of the prior-limit behavior of the conditionals.
Outcome criterion10(const Options& opt) {
  Outcome out;
  const int draws = 100000;
  {
    // Independent coordinates alternate a prior beta draw with the (lambda, nu) update.
    Rng rng(opt.seed + 101);
    const GuideSet g = GuideSet::empty(draws, 1.0);
    const Dataset d = Dataset::empty(draws);
    ChainState s = initial_state(d, g);
    s.sigma2 = 1.0;
    for (int it = 0; it < 500; ++it) {
      s.beta = sample_beta_conditional(s, g, d, rng);
      LocalScales l = sample_lambda_conditional(s, g, rng);
      s.lambda2 = l.lambda2;
      s.aux_nu = l.aux_nu;
    }
    std::vector<double> lam(static_cast<std::size_t>(draws));
    for (int j = 0; j < draws; ++j) lam[static_cast<std::size_t>(j)] = std::sqrt(s.lambda2[j]);
    const double pv = oracle::ks_pvalue(lam, [](double t) { return 2.0 / M_PI * std::atan(t); });
    out.check(pv > 0.01, fmt("lambda vs half-Cauchy(0,1): KS p = %.4f over %d draws", pv, draws));
  }
  {
    // Flat likelihood: prior variance 1e8, so the eta chain targets Dirichlet(theta, zeta).
    const Eigen::Index p = 3;
    GuideSet g;
    g.omega_tilde.resize(2, p);
    g.omega_tilde << 1.0, -0.5, 0.3, 0.2, 0.8, -1.0;
    g.theta = Eigen::Vector2d(0.3, 0.6);
    g.zeta = 1.0;
    g.beta_val = g.omega_tilde.row(0).transpose();
    g.scale_factors = Eigen::Vector2d::Ones();
    g.tau = 1.0;
    ChainState s;
    s.beta = Eigen::VectorXd::Zero(p);
    s.lambda2 = Eigen::VectorXd::Constant(p, 1e8);
    s.aux_nu = Eigen::VectorXd::Ones(p);
    s.sigma2 = 1.0;
    s.eta = Eigen::Vector3d(0.3, 0.6, 1.0) / 1.9;
    Rng rng(opt.seed + 102);
    const SamplerSettings settings;
    const int thin = 50;
    std::vector<std::vector<double>> marg(3);
    long accepted = 0, steps = 0;
    for (int it = 0; it < 1000 + draws * thin; ++it) {
      const EtaStep step = sample_eta_mh(s, g, settings, rng);
      s.eta = step.eta;
      accepted += step.accepted;
      ++steps;
      if (it < 1000 || (it - 1000) % thin != thin - 1) continue;
      for (int k = 0; k < 3; ++k) marg[static_cast<std::size_t>(k)].push_back(s.eta[k]);
    }
    const double alpha[] = {0.3, 0.6, 1.0};
    for (int k = 0; k < 3; ++k) {
      const bm::beta_distribution<> b(alpha[k], 1.9 - alpha[k]);
      const double pv = oracle::ks_pvalue(marg[static_cast<std::size_t>(k)],
                                          [&](double t) { return bm::cdf(b, std::clamp(t, 0.0, 1.0)); });
      out.check(pv > 0.01, fmt("eta_%d vs Beta(%.1f, %.1f) marginal of Dirichlet(0.3, 0.6, 1): KS p = %.4f over %d draws "
                               "(thinned by %d)",
                               k + 1, alpha[k], 1.9 - alpha[k], pv, draws, thin));
    }
    out.info(fmt("eta acceptance rate %.3f", static_cast<double>(accepted) / steps));
  }
  {
    Rng rng(opt.seed + 103);
    ChainState s;
    s.beta.resize(0);
    s.lambda2.resize(0);
    s.aux_nu.resize(0);
    s.eta = Eigen::VectorXd::Ones(1);
    const GuideSet g = GuideSet::empty(0, 1.0);
    const Dataset d = Dataset::empty(0);
    const SamplerSettings settings;
    std::vector<double> v(static_cast<std::size_t>(draws));
    for (auto& t : v) t = sample_sigma2_conditional(s, g, d, settings, rng);
    const bm::inverse_gamma ig(0.01, 0.01);
    const double pv = oracle::ks_pvalue(v, [&](double t) { return bm::cdf(ig, t); });
    out.check(pv > 0.01, fmt("sigma2 vs InverseGamma(0.01, 0.01): KS p = %.4f over %d draws", pv, draws));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria");
  Options opt;
  std::vector<int> only;
  app.add_option("--criterion", only, "Run only these criteria (1-10)");
  app.add_option("--warmup", opt.warmup, "Warmup sweeps per chain in the benchmark criteria");
  app.add_option("--samples", opt.samples, "Retained draws per chain in the benchmark criteria");
  app.add_option("--chains", opt.chains, "Chains per fit in the benchmark criteria");
  app.add_option("--source-warmup", opt.source_warmup, "Warmup sweeps for the source fits");
  app.add_option("--source-samples", opt.source_samples, "Retained draws for the source fits");
  app.add_option("--source-chains", opt.source_chains, "Chains for the source fits");
  app.add_option("--reps", opt.reps, "Replications per benchmark");
  app.add_option("--jobs", opt.jobs, "Concurrent replications");
  app.add_option("--seed", opt.seed);
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome(const Options&)>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  if (only.empty()) {
    for (int i = 1; i <= 10; ++i) only.push_back(i);
  }
  bool all = true;
  for (int c : only) {
    if (c < 1 || c > 10) {
      std::cerr << "no criterion " << c << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(c - 1)](opt);
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("FAIL exception: ") + e.what());
    }
    all = all && o.pass;
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << "\n";
    for (const auto& d : o.details) std::cout << "    " << d << "\n";
    std::cout.flush();
  }
  return all ? 0 : 1;
}
