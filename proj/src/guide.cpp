#include "trader/guide.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "trader/error.hpp"
#include "trader/rng.hpp"
#include "trader/sampler.hpp"

namespace trader {

GuideSet GuideSet::empty(Eigen::Index p, double tau, double zeta) {
  GuideSet g;
  g.omega_tilde.resize(0, p);
  g.theta.resize(0);
  g.zeta = zeta;
  g.beta_val = Eigen::VectorXd::Zero(p);
  g.scale_factors.resize(0);
  g.tau = tau;
  return g;
}

std::string GuideSet::to_json() const {
  nlohmann::json doc;
  doc["tau"] = tau;
  doc["zeta"] = zeta;
  doc["beta_val"] = std::vector<double>(beta_val.data(), beta_val.data() + beta_val.size());
  doc["sources"] = nlohmann::json::array();
  for (Eigen::Index k = 0; k < n_sources(); ++k) {
    const Eigen::VectorXd row = omega_tilde.row(k);
    doc["sources"].push_back({{"id", k < static_cast<Eigen::Index>(source_ids.size()) ? source_ids[k] : ""},
                              {"theta", theta[k]},
                              {"scale_factor", scale_factors[k]},
                              {"omega_tilde", std::vector<double>(row.data(), row.data() + row.size())}});
  }
  return doc.dump(2) + "\n";
}

std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("validation fraction must lie in (0,1)");
  const Eigen::Index n = data.n();
  if (static_cast<double>(n) * fraction < 2.0) throw ValidationError("validation split would hold fewer than two rows");
  const auto n_val = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * fraction));
  if (n_val < 1 || n_val >= n) throw ValidationError("validation split leaves an empty part");

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(seed);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_index(i + 1)]);

  std::vector<Eigen::Index> val(perm.begin(), perm.begin() + n_val);
  std::vector<Eigen::Index> train(perm.begin() + n_val, perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {data.subset(train), data.subset(val)};
}

Eigen::VectorXd estimate_beta_val(const Dataset& val, const TraderConfig& config) {
  if (val.n() < 1) throw ValidationError("validation set is empty");
  TraderConfig short_run = config;
  short_run.n_warmup = std::max(1, config.n_warmup / 2);
  short_run.n_samples = std::max(2, config.n_samples / 2);
  short_run.seed = derive_seed(config.seed, {stream_tag("beta_val")});
  return fit_horseshoe(val, short_run).summary.means();
}

RescaledSource rescale_source(const Eigen::VectorXd& omega_hat, const Eigen::VectorXd& beta_val) {
  if (omega_hat.size() != beta_val.size()) throw ValidationError("source and validation estimate differ in length");
  const double source_norm = omega_hat.norm();
  if (!(source_norm > 0.0)) throw ValidationError("zero-norm source estimate");
  const double target_norm = beta_val.norm();
  if (!(target_norm > 0.0)) {
    throw ValidationError("validation estimate has zero norm; the validation fit is uninformative");
  }
  const double factor = target_norm / source_norm;
  return {factor * omega_hat, factor};
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ValidationError("cosine similarity of vectors with different lengths");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("cosine similarity of a zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

GuideSet build_guide(const std::vector<SourceEstimate>& sources, const Eigen::VectorXd& beta_val,
                     const TraderConfig& config, Eigen::Index n_train) {
  const Eigen::Index p = beta_val.size();
  const double tau = config.tau_override ? *config.tau_override : select_tau(p, n_train, config.psi_hat_for(p));
  GuideSet g = GuideSet::empty(p, tau, config.zeta);
  g.beta_val = beta_val;
  const auto k_count = static_cast<Eigen::Index>(sources.size());
  g.omega_tilde.resize(k_count, p);
  g.theta.resize(k_count);
  g.scale_factors.resize(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto& s = sources[static_cast<std::size_t>(k)];
    if (s.omega_hat.size() != p) throw ValidationError("length mismatch: " + s.id);
    const RescaledSource r = rescale_source(s.omega_hat, beta_val);
    g.omega_tilde.row(k) = r.omega_tilde.transpose();
    g.scale_factors[k] = r.factor;
    g.theta[k] = std::max(cosine_similarity(s.omega_hat, beta_val), config.theta_floor);
    g.source_ids.push_back(s.id);
  }
  return g;
}

double select_tau(Eigen::Index p, Eigen::Index n0, double psi_hat) {
  const auto pd = static_cast<double>(p);
  if (!(psi_hat > 0.0) || !(psi_hat < pd)) throw ValidationError("psi_hat must lie strictly between 0 and p");
  if (n0 < 1) throw ValidationError("n0 must be at least 1");
  // Ratio first: psi_hat = p/2 then yields exactly 1/sqrt(n0).
  return ((pd - psi_hat) / psi_hat) / std::sqrt(static_cast<double>(n0));
}

double expected_informative_count(double tau, Eigen::Index p, Eigen::Index n0) {
  if (!(tau >= 0.0)) throw ValidationError("tau must be nonnegative");
  return static_cast<double>(p) / (1.0 + tau * std::sqrt(static_cast<double>(n0)));
}

}  // namespace trader
