#include "trader/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "trader/error.hpp"
#include "trader/rng.hpp"

namespace trader {

namespace {

// Rows with covariance rho^{|j - j'|}, built by the AR(1) recursion, which is
// the Cholesky factor of that matrix applied to standard normals.
Eigen::MatrixXd ar1_rows(Eigen::Index n, Eigen::Index p, double rho, Rng& rng) {
  const double innov = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double z = rng.normal();
      x(i, j) = j == 0 ? z : rho * x(i, j - 1) + innov * z;
    }
  }
  return x;
}

Eigen::VectorXd responses(const Eigen::MatrixXd& x, const Eigen::VectorXd& coef, double intercept, double noise_sd,
                          Rng& rng) {
  Eigen::VectorXd y = x * coef;
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += intercept + noise_sd * rng.normal();
  return y;
}

Eigen::VectorXd sparse_signal(const SimSpec& spec) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(spec.p);
  beta.head(spec.s).setConstant(spec.signal);
  return beta;
}

Rng target_rng(std::uint64_t seed, std::string_view what) { return Rng(derive_seed(seed, {stream_tag(what)})); }

Rng source_rng(std::uint64_t seed, Eigen::Index k) {
  return Rng(derive_seed(seed, {stream_tag("source"), static_cast<std::uint64_t>(k)}));
}

// Source covariates with covariance A + eps eps', eps ~ N(0, 0.3^2 I), drawn
// as L z + eps w with a scalar w per row.
Eigen::MatrixXd perturbed_ar1_rows(Eigen::Index n, Eigen::Index p, double rho, Rng& rng) {
  Eigen::VectorXd eps(p);
  for (Eigen::Index j = 0; j < p; ++j) eps[j] = 0.3 * rng.normal();
  Eigen::MatrixXd x = ar1_rows(n, p, rho, rng);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) += rng.normal() * eps.transpose();
  return x;
}

SimInstance make_target(const SimSpec& spec, std::uint64_t seed, const Eigen::VectorXd& beta, double rho) {
  Rng xr = target_rng(seed, "target_x");
  Rng nr = target_rng(seed, "target_noise");
  const Eigen::MatrixXd x = ar1_rows(spec.n0, spec.p, rho, xr);
  const Eigen::VectorXd y = responses(x, beta, 0.0, spec.noise_sd, nr);
  SimInstance inst{Dataset::create(x, y, false), {}, beta, {}, Eigen::VectorXd::Zero(spec.K), {}};
  return inst;
}

}  // namespace

void SimSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
  };
  require(n0 >= 1 && nk >= 1, "sample sizes must be positive");
  require(p >= 1, "p must be positive");
  require(s >= 0 && s <= p, "s must satisfy 0 <= s <= p");
  require(K >= 0, "K must be nonnegative");
  require(noise_sd > 0.0, "noise_sd must be positive");
  require(h >= 0.0, "h must be nonnegative");
  if (setting == Setting::II) {
    require(K_a >= 0 && K_a <= K, "K_a must satisfy 0 <= K_a <= K");
    require(K_a == K || p - 2 * s >= s, "Setting II needs p - 2s >= s to draw the shifted support");
  }
  if (setting == Setting::III) {
    require(static_cast<Eigen::Index>(scale_ratios.size()) == K, "scale_ratios must have K entries");
    require(static_cast<Eigen::Index>(correlations.size()) == K, "correlations must have K entries");
    for (double r : scale_ratios) require(r > 0.0, "scale ratios must be positive");
    for (double c : correlations) require(c >= -1.0 && c <= 1.0, "correlations must lie in [-1, 1]");
  }
}

double SimSpec::target_scale() const {
  return alpha_t > 0.0 ? alpha_t : signal * std::sqrt(static_cast<double>(s > 0 ? s : p));
}

std::string SimSpec::to_json() const {
  nlohmann::json doc;
  doc["setting"] = static_cast<int>(setting);
  doc["n0"] = n0;
  doc["nk"] = nk;
  doc["p"] = p;
  doc["s"] = s;
  doc["K"] = K;
  doc["h"] = h;
  doc["K_a"] = K_a;
  doc["scale_ratios"] = scale_ratios;
  doc["correlations"] = correlations;
  doc["noise_sd"] = noise_sd;
  doc["signal"] = signal;
  doc["alpha_t"] = target_scale();
  doc["setting3_joint"] = joint == Setting3Joint::Literal ? "literal" : "pairwise";
  doc["seed"] = seed;
  return doc.dump();
}

Eigen::MatrixXd ar1_covariance(Eigen::Index p, double rho) {
  if (!(std::abs(rho) < 1.0)) throw ValidationError("AR(1) correlation must satisfy |rho| < 1");
  Eigen::MatrixXd a(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) a(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  }
  return a;
}

Eigen::MatrixXd setting3_covariance(const SimSpec& spec) {
  const Eigen::Index k = spec.K;
  const double at = spec.target_scale();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k + 1, k + 1);
  c(0, 0) = at * at;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double as = at / spec.scale_ratios[static_cast<std::size_t>(i)];
    const double rho = spec.correlations[static_cast<std::size_t>(i)];
    c(i + 1, i + 1) = as * as;
    c(0, i + 1) = c(i + 1, 0) = rho * at * as;
  }
  return c / static_cast<double>(spec.p);
}

bool is_positive_semidefinite(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  if (!m.isApprox(m.transpose())) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -1e-12 * scale;
}

SimInstance gen_setting1(const SimSpec& spec, std::uint64_t seed) {
  if (spec.setting != Setting::I) throw ValidationError("gen_setting1 needs a Setting I spec");
  spec.validate();
  const Eigen::VectorXd beta = sparse_signal(spec);
  SimInstance inst = make_target(spec, seed, beta, 0.5);
  const double step = spec.h / static_cast<double>(spec.p);
  for (Eigen::Index k = 0; k < spec.K; ++k) {
    Rng rng = source_rng(seed, k);
    Eigen::VectorXd omega(spec.p);
    for (Eigen::Index j = 0; j < spec.p; ++j) omega[j] = beta[j] + step * rng.rademacher();
    const Eigen::MatrixXd x = perturbed_ar1_rows(spec.nk, spec.p, 0.5, rng);
    const Eigen::VectorXd y = responses(x, omega, 0.0, spec.noise_sd, rng);
    inst.sources.push_back(Dataset::create(x, y, false));
    inst.omega_true.push_back(std::move(omega));
  }
  return inst;
}

SimInstance gen_setting2(const SimSpec& spec, std::uint64_t seed) {
  if (spec.setting != Setting::II) throw ValidationError("gen_setting2 needs a Setting II spec");
  spec.validate();
  const Eigen::VectorXd beta = sparse_signal(spec);
  SimInstance inst = make_target(spec, seed, beta, 0.9);
  inst.intercepts_true = Eigen::VectorXd::Constant(spec.K, 0.5);
  const double step = spec.h / static_cast<double>(spec.p);
  for (Eigen::Index k = 0; k < spec.K; ++k) {
    Rng rng = source_rng(seed, k);
    Eigen::VectorXd omega(spec.p);
    std::vector<Eigen::Index> support;
    if (k < spec.K_a) {
      for (Eigen::Index j = 0; j < spec.p; ++j) omega[j] = beta[j] + step * rng.rademacher();
    } else {
      for (Eigen::Index j = 0; j < spec.p; ++j) omega[j] = 2.0 * step * rng.rademacher();
      // S(k): s distinct indices from {2s+1, ..., p} by partial Fisher-Yates.
      std::vector<Eigen::Index> pool(static_cast<std::size_t>(spec.p - 2 * spec.s));
      std::iota(pool.begin(), pool.end(), 2 * spec.s);
      for (Eigen::Index i = 0; i < spec.s; ++i) {
        const std::size_t pick = static_cast<std::size_t>(i) + rng.uniform_index(pool.size() - static_cast<std::size_t>(i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[pick]);
      }
      support.assign(pool.begin(), pool.begin() + spec.s);
      std::sort(support.begin(), support.end());
      for (Eigen::Index j = spec.s; j < 2 * spec.s; ++j) omega[j] += 0.5;
      for (Eigen::Index j : support) omega[j] += 0.5;
      for (auto& j : support) ++j;
    }
    Eigen::MatrixXd x(spec.nk, spec.p);
    for (Eigen::Index i = 0; i < spec.nk; ++i) {
      for (Eigen::Index j = 0; j < spec.p; ++j) x(i, j) = rng.student_t(4.0);
    }
    const Eigen::VectorXd y = responses(x, omega, 0.5, spec.noise_sd, rng);
    inst.sources.push_back(Dataset::create(x, y, true));
    inst.omega_true.push_back(std::move(omega));
    inst.shifted_support.push_back(std::move(support));
  }
  return inst;
}

SimInstance gen_setting3(const SimSpec& spec, std::uint64_t seed) {
  if (spec.setting != Setting::III) throw ValidationError("gen_setting3 needs a Setting III spec");
  spec.validate();
  const double at = spec.target_scale();
  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(spec.p));
  Eigen::VectorXd beta(spec.p);
  std::vector<Eigen::VectorXd> omegas(static_cast<std::size_t>(spec.K), Eigen::VectorXd(spec.p));

  Rng coef_rng = target_rng(seed, "coef");
  if (spec.joint == Setting3Joint::Literal) {
    const Eigen::MatrixXd cov = setting3_covariance(spec);
    if (!is_positive_semidefinite(cov)) {
      throw ValidationError("Setting III covariance is not positive semidefinite (sum of squared correlations exceeds 1)");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::MatrixXd root =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    for (Eigen::Index j = 0; j < spec.p; ++j) {
      const Eigen::VectorXd draw = root * coef_rng.normal_vector(spec.K + 1);
      beta[j] = draw[0];
      for (Eigen::Index k = 0; k < spec.K; ++k) omegas[static_cast<std::size_t>(k)][j] = draw[k + 1];
    }
  } else {
    for (Eigen::Index j = 0; j < spec.p; ++j) beta[j] = at * inv_sqrt_p * coef_rng.normal();
  }

  SimInstance inst = make_target(spec, seed, beta, 0.5);
  for (Eigen::Index k = 0; k < spec.K; ++k) {
    Rng rng = source_rng(seed, k);
    Eigen::VectorXd& omega = omegas[static_cast<std::size_t>(k)];
    if (spec.joint == Setting3Joint::Pairwise) {
      const double as = at / spec.scale_ratios[static_cast<std::size_t>(k)];
      const double rho = spec.correlations[static_cast<std::size_t>(k)];
      const double resid_sd = std::sqrt(std::max(0.0, 1.0 - rho * rho)) * as * inv_sqrt_p;
      for (Eigen::Index j = 0; j < spec.p; ++j) omega[j] = rho * (as / at) * beta[j] + resid_sd * rng.normal();
    }
    const Eigen::MatrixXd x = perturbed_ar1_rows(spec.nk, spec.p, 0.5, rng);
    const Eigen::VectorXd y = responses(x, omega, 0.0, spec.noise_sd, rng);
    inst.sources.push_back(Dataset::create(x, y, false));
    inst.omega_true.push_back(omega);
  }
  return inst;
}

SimInstance generate(const SimSpec& spec, std::uint64_t seed) {
  switch (spec.setting) {
    case Setting::I:
      return gen_setting1(spec, seed);
    case Setting::II:
      return gen_setting2(spec, seed);
    case Setting::III:
      return gen_setting3(spec, seed);
  }
  throw ValidationError("unknown setting");
}

std::vector<double> setting3_scale_ratios_i() { return {1.0, 1.11, 1.22, 1.33, 1.44, 1.56, 1.66, 1.78, 1.89, 2.0}; }

void save_instance(const SimInstance& inst, const SimSpec& spec, std::uint64_t seed, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_dataset(inst.target, fs::path(dir) / "target.csv");
  for (std::size_t k = 0; k < inst.sources.size(); ++k) {
    save_dataset(inst.sources[k], fs::path(dir) / ("source_" + std::to_string(k + 1) + ".csv"));
  }
  nlohmann::json truth;
  truth["beta_true"] = std::vector<double>(inst.beta_true.data(), inst.beta_true.data() + inst.beta_true.size());
  truth["omega_true"] = nlohmann::json::array();
  for (const auto& w : inst.omega_true) truth["omega_true"].push_back(std::vector<double>(w.data(), w.data() + w.size()));
  truth["intercepts_true"] =
      std::vector<double>(inst.intercepts_true.data(), inst.intercepts_true.data() + inst.intercepts_true.size());
  truth["source_has_intercept"] = nlohmann::json::array();
  for (const auto& s : inst.sources) truth["source_has_intercept"].push_back(s.has_intercept());
  truth["spec"] = nlohmann::json::parse(spec.to_json());
  truth["seed"] = seed;
  std::ofstream out(fs::path(dir) / "truth.json");
  if (!out) throw Error("cannot write truth.json in " + dir);
  out << truth.dump(2) << "\n";
}

}  // namespace trader
