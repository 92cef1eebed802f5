#include <cmath>
#include <complex>
#include <limits>

#include <unsupported/Eigen/FFT>

#include "trader/error.hpp"
#include "trader/sampler.hpp"

namespace trader {

namespace {

// Biased autocovariance for lags 0..n-1 via zero-padded FFT.
Eigen::VectorXd autocovariance(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::Index m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<double> padded(static_cast<std::size_t>(m), 0.0);
  const double mean = x.mean();
  for (Eigen::Index i = 0; i < n; ++i) padded[static_cast<std::size_t>(i)] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq) f = std::complex<double>(std::norm(f), 0.0);
  std::vector<double> back;
  fft.inv(back, freq);
  Eigen::VectorXd out(n);
  for (Eigen::Index t = 0; t < n; ++t) out[t] = back[static_cast<std::size_t>(t)] / static_cast<double>(n);
  return out;
}

double sample_variance(const Eigen::VectorXd& x) {
  const double mean = x.mean();
  return (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
}

}  // namespace

double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.size() < 2) throw ValidationError("split R-hat needs at least two chains");
  std::vector<Eigen::VectorXd> halves;
  Eigen::Index half = chains.front().size() / 2;
  for (const auto& c : chains) half = std::min(half, c.size() / 2);
  if (half < 2) throw ValidationError("chains too short for split R-hat");
  for (const auto& c : chains) {
    halves.emplace_back(c.head(half));
    halves.emplace_back(c.segment(c.size() - half, half));
  }
  const auto m = static_cast<double>(halves.size());
  const auto n = static_cast<double>(half);
  Eigen::VectorXd means(static_cast<Eigen::Index>(halves.size()));
  double within = 0.0;
  for (std::size_t i = 0; i < halves.size(); ++i) {
    means[static_cast<Eigen::Index>(i)] = halves[i].mean();
    within += sample_variance(halves[i]);
  }
  within /= m;
  const double grand = means.mean();
  const double between_over_n = (means.array() - grand).square().sum() / (m - 1.0);
  const double var_plus = (n - 1.0) / n * within + between_over_n;
  if (within <= 0.0) return var_plus <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(var_plus / within);
}

double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) throw ValidationError("no chains");
  Eigen::Index n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) throw ValidationError("chains too short for ESS");
  const auto m = static_cast<double>(chains.size());
  const auto nd = static_cast<double>(n);

  std::vector<Eigen::VectorXd> acov;
  Eigen::VectorXd means(static_cast<Eigen::Index>(chains.size()));
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const Eigen::VectorXd c = chains[i].head(n);
    acov.push_back(autocovariance(c));
    means[static_cast<Eigen::Index>(i)] = c.mean();
  }
  double mean_var = 0.0;
  for (const auto& a : acov) mean_var += a[0] * nd / (nd - 1.0);
  mean_var /= m;
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (chains.size() > 1) var_plus += (means.array() - means.mean()).square().sum() / (m - 1.0);
  if (!(var_plus > 0.0)) return m * nd;

  auto rho = [&](Eigen::Index t) {
    double s = 0.0;
    for (const auto& a : acov) s += a[t];
    return 1.0 - (mean_var - s / m) / var_plus;
  };

  // Geyer's initial positive, monotone sequence.
  double tau_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau_sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * tau_sum, 1.0 / std::log10(m * nd));
  return m * nd / tau;
}

std::vector<ParameterDiagnostic> diagnostics(const std::vector<PosteriorDraws>& chains) {
  if (chains.empty()) throw ValidationError("no chains");
  std::vector<ParameterDiagnostic> out;
  auto add = [&](const std::string& name, auto&& column) {
    std::vector<Eigen::VectorXd> series;
    for (const auto& c : chains) series.emplace_back(column(c));
    ParameterDiagnostic d;
    d.name = name;
    d.ess = effective_sample_size(series);
    if (chains.size() >= 2) {
      d.rhat = split_rhat(series);
      d.flagged = !(*d.rhat <= 1.05);
    }
    out.push_back(std::move(d));
  };
  const Eigen::Index p = chains.front().p();
  for (Eigen::Index j = 0; j < p; ++j) {
    add("beta_" + std::to_string(j + 1), [j](const PosteriorDraws& c) { return Eigen::VectorXd(c.beta.col(j)); });
  }
  if (chains.front().has_intercept()) add("intercept", [](const PosteriorDraws& c) { return c.intercept; });
  add("sigma2", [](const PosteriorDraws& c) { return c.sigma2; });
  // eta is fixed at (1) without sources
  const Eigen::Index k1 = chains.front().eta.cols();
  for (Eigen::Index k = 0; k1 > 1 && k < k1; ++k) {
    add("eta_" + std::to_string(k + 1), [k](const PosteriorDraws& c) { return Eigen::VectorXd(c.eta.col(k)); });
  }
  return out;
}

std::string diagnostics_csv(const std::vector<ParameterDiagnostic>& diags) {
  std::string out = "parameter,rhat,ess,flagged\n";
  for (const auto& d : diags) {
    out += d.name + "," + (d.rhat ? format_real(*d.rhat) : std::string("NA")) + "," + format_real(d.ess) + "," +
           (d.flagged ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace trader
