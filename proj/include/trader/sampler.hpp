#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trader/core.hpp"
#include "trader/guide.hpp"
#include "trader/rng.hpp"

namespace trader {

/// Current values of every sampled quantity. `lambda2` and `aux_nu` are the
/// two levels of the inverse-gamma decomposition of the half-Cauchy scale.
struct ChainState {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double sigma2 = 1.0;
  Eigen::VectorXd lambda2;
  Eigen::VectorXd aux_nu;
  Eigen::VectorXd eta;  // K + 1 simplex weights, zero component last
};

/// Cross products reused by every beta update.
struct LinearStats {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  Eigen::VectorXd col_sums;
  double y_sum = 0.0;
  Eigen::Index n = 0;

  static LinearStats from(const Dataset& data);
};

/// Hyperparameters the conditional updates need beyond the guide.
struct SamplerSettings {
  double nu = 0.01;                          // sigma^2 ~ InverseGamma(nu, nu)
  double eta_proposal_concentration = 50.0;  // c in Dirichlet(c * eta + floor)
  double eta_proposal_floor = 0.1;

  static SamplerSettings from(const TraderConfig& config) {
    return {config.nu, config.eta_proposal_concentration, 0.1};
  }
};

/// Prior mean sum_k eta_k * omega_tilde_k; the zero component adds nothing.
Eigen::VectorXd prior_mean(const GuideSet& guide, const Eigen::VectorXd& eta);

/// Gaussian full conditional of beta: precision X'X/s2 + D^{-1} with
/// D = diag(s2 tau^2 lambda_j^2), and its mean.
struct BetaConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
};
BetaConditional beta_conditional(const ChainState& state, const GuideSet& guide, const LinearStats& stats);

/// One exact draw of beta from its full conditional. Dense Cholesky for
/// p <= 1000, the n-dimensional identity beyond that, and a diagonal draw
/// when there are no rows. Throws NumericalError with the failing pivot.
Eigen::VectorXd sample_beta_conditional(const ChainState& state, const GuideSet& guide, const Dataset& data,
                                        const LinearStats& stats, Rng& rng);
Eigen::VectorXd sample_beta_conditional(const ChainState& state, const GuideSet& guide, const Dataset& data,
                                        Rng& rng);

/// Flat-prior intercept: N(mean residual, sigma2 / n).
double sample_intercept_conditional(const ChainState& state, const LinearStats& stats, Rng& rng);

struct LocalScales {
  Eigen::VectorXd lambda2;
  Eigen::VectorXd aux_nu;
};
LocalScales sample_lambda_conditional(const ChainState& state, const GuideSet& guide, Rng& rng);

double sample_sigma2_conditional(const ChainState& state, const GuideSet& guide, const Dataset& data,
                                 const SamplerSettings& settings, Rng& rng);

struct EtaStep {
  Eigen::VectorXd eta;
  bool accepted = false;
  double log_accept_ratio = 0.0;
};

/// Unnormalized log full conditional of eta: Dirichlet(theta, zeta) density
/// times the Gaussian prior of beta around m(eta).
double eta_log_target(const ChainState& state, const GuideSet& guide, const Eigen::VectorXd& eta);
/// log MH acceptance ratio for moving from the current eta to `proposal`.
double eta_log_accept_ratio(const ChainState& state, const GuideSet& guide, const SamplerSettings& settings,
                            const Eigen::VectorXd& proposal);
/// One Metropolis step with a Dirichlet proposal centered at the current eta.
/// With no sources eta stays at (1) and no randomness is consumed.
EtaStep sample_eta_mh(const ChainState& state, const GuideSet& guide, const SamplerSettings& settings, Rng& rng);

/// Systematic scan: beta, intercept, (lambda, nu), eta, sigma^2.
void gibbs_sweep(ChainState& state, const GuideSet& guide, const Dataset& data, const LinearStats& stats,
                 const SamplerSettings& settings, Rng& rng);

ChainState initial_state(const Dataset& data, const GuideSet& guide);

PosteriorDraws run_chain(const Dataset& train, const GuideSet& guide, const TraderConfig& config, int chain_id,
                         std::uint64_t seed);

struct FitResult {
  std::vector<PosteriorDraws> chains;
  PosteriorSummary summary;
  GuideSet guide;
  Eigen::Index n_fit_rows = 0;
};

/// Validation split, source guide, then `n_chains` chains on the training rows.
/// With no sources this is exactly fit_horseshoe.
FitResult fit_trader(const Dataset& data, const std::vector<SourceEstimate>& sources, const TraderConfig& config,
                     int jobs = 1);

/// Zero-mean horseshoe on all rows.
FitResult fit_horseshoe(const Dataset& data, const TraderConfig& config, int jobs = 1);

/// Shrinkage-toward-source weight 1 / (1 + tau^2 lambda^2 n0).
double kappa(double tau, double lambda, double n0);

/// Pools chains; equal-tailed intervals from linearly interpolated order statistics.
PosteriorSummary summarize(const std::vector<PosteriorDraws>& chains, double level);

/// Quantile with linear interpolation between order statistics (sorted input).
double sorted_quantile(const std::vector<double>& sorted, double prob);

struct ParameterDiagnostic {
  std::string name;
  std::optional<double> rhat;  // absent for a single chain
  double ess = 0.0;
  bool flagged = false;        // rhat > 1.05
};

double split_rhat(const std::vector<Eigen::VectorXd>& chains);
double effective_sample_size(const std::vector<Eigen::VectorXd>& chains);
std::vector<ParameterDiagnostic> diagnostics(const std::vector<PosteriorDraws>& chains);
std::string diagnostics_csv(const std::vector<ParameterDiagnostic>& diags);
std::string summary_csv(const PosteriorSummary& summary);

}  // namespace trader
