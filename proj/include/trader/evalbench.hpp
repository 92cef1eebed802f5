#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trader/core.hpp"
#include "trader/simgen.hpp"

namespace trader {

enum class Stratum { All, Signal, Noise };
std::string to_string(Stratum s);

/// One method on one replication, restricted to one coefficient stratum.
/// Selection rates are only reported on the `All` stratum of sparse designs;
/// elsewhere they are NaN.
struct MetricsReport {
  std::string method;
  int setting = 1;
  Stratum stratum = Stratum::All;
  int replication = 0;
  double mse = 0.0;
  double avg_width = 0.0;
  double coverage = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double fpr = 0.0;               // FP / (FP + FN)
  double fpr_conventional = 0.0;  // FP / (FP + TN)
  bool fpr_undefined = false;     // FP + FN == 0; fpr reported as 0
};

/// Indices j with beta_true[j] != 0 (signal) or == 0 (noise).
std::vector<Eigen::Index> stratum_indices(const Eigen::VectorXd& beta_true, Stratum stratum);

double estimation_mse(const Eigen::VectorXd& post_mean, const Eigen::VectorXd& beta_true,
                      Stratum stratum = Stratum::All);

struct IntervalMetrics {
  double coverage = 0.0;
  double avg_width = 0.0;
};
IntervalMetrics interval_metrics(const PosteriorSummary& summary, const Eigen::VectorXd& beta_true,
                                 Stratum stratum = Stratum::All);

struct SelectionMetrics {
  double tpr = 0.0;
  double tnr = 0.0;
  double fpr = 0.0;
  double fpr_conventional = 0.0;
  bool fpr_undefined = false;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};
/// Requires at least one nonzero and one zero true coefficient.
SelectionMetrics selection_metrics(const PosteriorSummary& summary, const Eigen::VectorXd& beta_true);

/// Three stratified reports for one fitted method.
std::vector<MetricsReport> metrics_for(const std::string& method, int setting, int replication,
                                       const PosteriorSummary& summary, const Eigen::VectorXd& beta_true);

struct BenchmarkOptions {
  int jobs = 1;
  std::set<int> inject_failures;  // replications forced to fail (testing the failure path)
  /// Sampler settings for the horseshoe fits that produce source estimates.
  /// Only their posterior means are used, so shorter chains usually suffice.
  /// Defaults to the target config.
  std::optional<TraderConfig> source_config;
};

struct ReplicationFailure {
  int replication = 0;
  std::string message;
};

struct BenchmarkResult {
  std::vector<MetricsReport> rows;  // sorted by (replication, method, stratum)
  std::vector<ReplicationFailure> failures;
  long draws_checked = 0;           // retained draws that passed the PosteriorDraws invariants
  double wall_seconds = 0.0;
};

/// Per replication: simulate, fit the horseshoe to every source to obtain
/// source estimates, then fit the requested methods on the target.
/// Results depend only on the arguments, never on `options.jobs`.
BenchmarkResult run_benchmark(const SimSpec& spec, const std::set<std::string>& methods, int reps,
                              const TraderConfig& config, std::uint64_t master_seed,
                              const BenchmarkOptions& options = {});

/// Source estimates for one simulated instance, serialized through the
/// source-bundle format.
std::vector<SourceEstimate> estimate_sources(const SimInstance& inst, const TraderConfig& config, std::uint64_t seed,
                                             long* draws_checked = nullptr);

std::string metrics_csv(const std::vector<MetricsReport>& rows);

/// Mean and standard deviation per (method, setting, stratum, metric).
struct ReportRow {
  std::string method;
  std::string setting;
  std::string stratum;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  long count = 0;
};
/// Parses a metrics.csv text; throws LoadError on missing columns or no rows.
std::vector<ReportRow> aggregate_metrics(const std::string& metrics_csv_text);
std::string report_csv(const std::vector<ReportRow>& rows);

}  // namespace trader
