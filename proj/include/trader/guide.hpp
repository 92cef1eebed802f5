#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trader/core.hpp"

namespace trader {

/// Rescaled sources and the Dirichlet concentrations that weight them.
/// Row k of `omega_tilde` has the same Euclidean norm as `beta_val`.
struct GuideSet {
  Eigen::MatrixXd omega_tilde;  // K x p
  Eigen::VectorXd theta;        // K
  double zeta = 1.0;
  Eigen::VectorXd beta_val;     // p
  Eigen::VectorXd scale_factors;
  double tau = 1.0;
  std::vector<std::string> source_ids;

  Eigen::Index n_sources() const { return omega_tilde.rows(); }
  /// Guide with no sources: zero prior mean, eta fixed at (1).
  static GuideSet empty(Eigen::Index p, double tau, double zeta = 1.0);
  std::string to_json() const;
};

/// Disjoint random row partition; |val| = round(n * fraction).
std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction, std::uint64_t seed);

/// Horseshoe posterior mean on the validation rows, run with half-length chains.
Eigen::VectorXd estimate_beta_val(const Dataset& val, const TraderConfig& config);

struct RescaledSource {
  Eigen::VectorXd omega_tilde;
  double factor = 0.0;
};

RescaledSource rescale_source(const Eigen::VectorXd& omega_hat, const Eigen::VectorXd& beta_val);
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

GuideSet build_guide(const std::vector<SourceEstimate>& sources, const Eigen::VectorXd& beta_val,
                     const TraderConfig& config, Eigen::Index n_train);

/// Global scale that makes the expected number of source-informed
/// coefficients equal `psi_hat`: (p - psi_hat) / (sqrt(n0) * psi_hat).
double select_tau(Eigen::Index p, Eigen::Index n0, double psi_hat);

/// p / (1 + tau * sqrt(n0)).
double expected_informative_count(double tau, Eigen::Index p, Eigen::Index n0);

}  // namespace trader
