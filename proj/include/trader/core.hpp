#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace trader {

/// Design matrix plus response. An intercept, when modeled, is a separate
/// unpenalized term and never a column of `x`.
class Dataset {
 public:
  /// Validates dimensions and finiteness; requires at least one row.
  static Dataset create(Eigen::MatrixXd x, Eigen::VectorXd y, bool has_intercept = false);
  /// A zero-row dataset with `p` columns (prior-only limit of the sampler).
  static Dataset empty(Eigen::Index p, bool has_intercept = false);

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  bool has_intercept() const { return has_intercept_; }
  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index p() const { return x_.cols(); }

  /// Rows in the given order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

 private:
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, bool has_intercept)
      : x_(std::move(x)), y_(std::move(y)), has_intercept_(has_intercept) {}

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  bool has_intercept_ = false;
};

/// A pre-trained coefficient vector shared by a source study.
struct SourceEstimate {
  std::string id;
  Eigen::VectorXd omega_hat;
  std::optional<double> intercept_hat;
};

struct TraderConfig {
  std::optional<double> psi_hat;       // defaults to p/2 when unset
  std::optional<double> tau_override;
  double zeta = 1.0;
  double nu = 0.01;
  double validation_fraction = 1.0 / 3.0;
  int n_warmup = 2000;
  int n_samples = 2000;
  int n_chains = 4;
  std::uint64_t seed = 0;
  double eta_proposal_concentration = 50.0;
  double ci_level = 0.95;
  double theta_floor = 0.01;

  /// Throws ValidationError on out-of-range fields.
  void validate() const;
  double psi_hat_for(Eigen::Index p) const { return psi_hat.value_or(0.5 * static_cast<double>(p)); }
  /// Canonical `key = value` text, one field per line, 17 significant digits.
  std::string to_text() const;
  /// Hex digest of `to_text()`.
  std::string digest() const;
};

/// Parses the flat `key = value` format written by `TraderConfig::to_text`.
/// Unknown keys and malformed values raise LoadError; absent keys keep the
/// values already in `base`.
TraderConfig parse_config(const std::string& text, TraderConfig base = {});
TraderConfig load_config(const std::filesystem::path& path, TraderConfig base = {});

/// Retained draws from one chain. `lambda` holds the local scales (not squared).
struct PosteriorDraws {
  Eigen::MatrixXd beta;       // S x p
  Eigen::VectorXd intercept;  // length S when modeled, else empty
  Eigen::VectorXd sigma2;     // length S
  Eigen::MatrixXd lambda;     // S x p
  Eigen::MatrixXd eta;        // S x (K + 1)
  double tau = 0.0;
  int chain_id = 0;
  std::uint64_t seed = 0;
  std::string config_digest;

  Eigen::Index n_draws() const { return beta.rows(); }
  Eigen::Index p() const { return beta.cols(); }
  bool has_intercept() const { return intercept.size() > 0; }
  /// Positivity of sigma2 and lambda, simplex rows of eta, shape agreement.
  void validate() const;
};

struct CoefficientSummary {
  double mean = 0.0;
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool selected = false;  // interval excludes zero
};

struct PosteriorSummary {
  double level = 0.95;
  std::vector<CoefficientSummary> coef;

  Eigen::VectorXd means() const;
  std::size_t size() const { return coef.size(); }
};

Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset_csv(const std::string& text, bool has_intercept = false);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

std::vector<SourceEstimate> load_sources(const std::filesystem::path& path);
std::vector<SourceEstimate> parse_sources(const std::string& json_text);
std::string sources_to_json(const std::vector<SourceEstimate>& sources);

/// Writes one CSV per chain plus `manifest.json` into `dir`.
void save_draws(const std::vector<PosteriorDraws>& chains, const std::filesystem::path& dir);
void save_draws(const PosteriorDraws& draws, const std::filesystem::path& dir);

struct LoadedDraws {
  std::vector<PosteriorDraws> chains;
  bool digest_mismatch = false;  // set when `expected_digest` disagrees with the manifest
};

/// Reads a directory written by save_draws. A truncated or altered chain file
/// raises CorruptionError.
LoadedDraws load_draws(const std::filesystem::path& dir,
                       const std::optional<std::string>& expected_digest = std::nullopt);

/// FNV-1a 64-bit digest rendered as 16 hex characters.
std::string hex_digest(const std::string& bytes);

/// Shortest round-tripping decimal form (17 significant digits).
std::string format_real(double v);

}  // namespace trader
