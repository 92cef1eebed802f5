#include "trader/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "trader/error.hpp"
#include "trader/parallel.hpp"
#include "trader/rng.hpp"
#include "trader/sampler.hpp"

namespace trader {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_length(Eigen::Index a, Eigen::Index b) {
  if (a != b) throw ValidationError("length mismatch between estimate and truth");
}

std::string format_metric(double v) { return std::isnan(v) ? "NA" : format_real(v); }

}  // namespace

std::string to_string(Stratum s) {
  switch (s) {
    case Stratum::All:
      return "all";
    case Stratum::Signal:
      return "signal";
    case Stratum::Noise:
      return "noise";
  }
  return "all";
}

std::vector<Eigen::Index> stratum_indices(const Eigen::VectorXd& beta_true, Stratum stratum) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < beta_true.size(); ++j) {
    const bool signal = beta_true[j] != 0.0;
    if (stratum == Stratum::All || (stratum == Stratum::Signal) == signal) idx.push_back(j);
  }
  return idx;
}

double estimation_mse(const Eigen::VectorXd& post_mean, const Eigen::VectorXd& beta_true, Stratum stratum) {
  require_same_length(post_mean.size(), beta_true.size());
  const auto idx = stratum_indices(beta_true, stratum);
  if (idx.empty()) return kNaN;
  double sum = 0.0;
  for (Eigen::Index j : idx) sum += (post_mean[j] - beta_true[j]) * (post_mean[j] - beta_true[j]);
  return sum / static_cast<double>(idx.size());
}

IntervalMetrics interval_metrics(const PosteriorSummary& summary, const Eigen::VectorXd& beta_true, Stratum stratum) {
  require_same_length(static_cast<Eigen::Index>(summary.size()), beta_true.size());
  const auto idx = stratum_indices(beta_true, stratum);
  if (idx.empty()) return {kNaN, kNaN};
  double covered = 0.0;
  double width = 0.0;
  for (Eigen::Index j : idx) {
    const auto& c = summary.coef[static_cast<std::size_t>(j)];
    if (c.lower <= beta_true[j] && beta_true[j] <= c.upper) covered += 1.0;
    width += c.upper - c.lower;
  }
  const auto m = static_cast<double>(idx.size());
  return {covered / m, width / m};
}

SelectionMetrics selection_metrics(const PosteriorSummary& summary, const Eigen::VectorXd& beta_true) {
  require_same_length(static_cast<Eigen::Index>(summary.size()), beta_true.size());
  SelectionMetrics out;
  for (Eigen::Index j = 0; j < beta_true.size(); ++j) {
    const bool truth = beta_true[j] != 0.0;
    const bool selected = summary.coef[static_cast<std::size_t>(j)].selected;
    if (truth && selected) ++out.tp;
    if (truth && !selected) ++out.fn;
    if (!truth && selected) ++out.fp;
    if (!truth && !selected) ++out.tn;
  }
  if (out.tp + out.fn == 0) throw ValidationError("TPR undefined: truth has no nonzero coefficient");
  if (out.tn + out.fp == 0) throw ValidationError("TNR undefined: truth has no zero coefficient");
  out.tpr = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fn);
  out.tnr = static_cast<double>(out.tn) / static_cast<double>(out.tn + out.fp);
  out.fpr_conventional = static_cast<double>(out.fp) / static_cast<double>(out.fp + out.tn);
  if (out.fp + out.fn == 0) {
    out.fpr = 0.0;
    out.fpr_undefined = true;
  } else {
    out.fpr = static_cast<double>(out.fp) / static_cast<double>(out.fp + out.fn);
  }
  return out;
}

std::vector<MetricsReport> metrics_for(const std::string& method, int setting, int replication,
                                       const PosteriorSummary& summary, const Eigen::VectorXd& beta_true) {
  const Eigen::VectorXd mean = summary.means();
  const auto signal = stratum_indices(beta_true, Stratum::Signal).size();
  const bool sparse = setting != 3 && signal > 0 && signal < static_cast<std::size_t>(beta_true.size());
  std::vector<MetricsReport> out;
  for (Stratum st : {Stratum::All, Stratum::Signal, Stratum::Noise}) {
    MetricsReport r;
    r.method = method;
    r.setting = setting;
    r.stratum = st;
    r.replication = replication;
    r.mse = estimation_mse(mean, beta_true, st);
    const IntervalMetrics iv = interval_metrics(summary, beta_true, st);
    r.coverage = iv.coverage;
    r.avg_width = iv.avg_width;
    r.tpr = r.tnr = r.fpr = r.fpr_conventional = kNaN;
    if (sparse && st == Stratum::All) {
      const SelectionMetrics sel = selection_metrics(summary, beta_true);
      r.tpr = sel.tpr;
      r.tnr = sel.tnr;
      r.fpr = sel.fpr;
      r.fpr_conventional = sel.fpr_conventional;
      r.fpr_undefined = sel.fpr_undefined;
    }
    out.push_back(r);
  }
  return out;
}

std::vector<SourceEstimate> estimate_sources(const SimInstance& inst, const TraderConfig& config, std::uint64_t seed,
                                             long* draws_checked) {
  std::vector<SourceEstimate> estimates;
  for (std::size_t k = 0; k < inst.sources.size(); ++k) {
    TraderConfig cfg = config;
    cfg.seed = derive_seed(seed, {static_cast<std::uint64_t>(k)});
    const FitResult fit = fit_horseshoe(inst.sources[k], cfg);
    SourceEstimate est;
    est.id = "src" + std::to_string(k + 1);
    est.omega_hat = fit.summary.means();
    if (inst.sources[k].has_intercept()) {
      double sum = 0.0;
      long count = 0;
      for (const auto& c : fit.chains) {
        sum += c.intercept.sum();
        count += static_cast<long>(c.intercept.size());
      }
      est.intercept_hat = sum / static_cast<double>(count);
    }
    if (draws_checked) {
      for (const auto& c : fit.chains) *draws_checked += static_cast<long>(c.n_draws());
    }
    estimates.push_back(std::move(est));
  }
  // Summary-level sharing goes through the same bundle format as real use.
  return parse_sources(sources_to_json(estimates));
}

BenchmarkResult run_benchmark(const SimSpec& spec, const std::set<std::string>& methods, int reps,
                              const TraderConfig& config, std::uint64_t master_seed,
                              const BenchmarkOptions& options) {
  if (reps < 1) throw ValidationError("reps must be at least 1");
  if (methods.empty()) throw ValidationError("no methods requested");
  for (const auto& m : methods) {
    if (m != "trader" && m != "horseshoe") throw ValidationError("unknown method \"" + m + "\"");
  }
  spec.validate();
  config.validate();
  const TraderConfig& source_config = options.source_config ? *options.source_config : config;
  source_config.validate();
  const auto start = std::chrono::steady_clock::now();

  struct RepOutcome {
    std::vector<MetricsReport> rows;
    std::optional<std::string> failure;
    long draws = 0;
  };
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));
  const int setting = static_cast<int>(spec.setting);

  parallel_for(outcomes.size(), options.jobs, [&](std::size_t i) {
    const int rep = static_cast<int>(i);
    RepOutcome& out = outcomes[i];
    try {
      if (options.inject_failures.count(rep)) throw Error("injected failure");
      const std::uint64_t rep_seed = derive_seed(master_seed, {stream_tag("replication"), i});
      const SimInstance inst = generate(spec, derive_seed(rep_seed, {stream_tag("simulate")}));
      auto count = [&out](const FitResult& fit) {
        for (const auto& c : fit.chains) out.draws += static_cast<long>(c.n_draws());
      };
      if (methods.count("horseshoe")) {
        TraderConfig cfg = config;
        cfg.seed = derive_seed(rep_seed, {stream_tag("horseshoe")});
        const FitResult fit = fit_horseshoe(inst.target, cfg);
        count(fit);
        auto rows = metrics_for("horseshoe", setting, rep, fit.summary, inst.beta_true);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
      }
      if (methods.count("trader")) {
        const auto sources =
            estimate_sources(inst, source_config, derive_seed(rep_seed, {stream_tag("sources")}), &out.draws);
        TraderConfig cfg = config;
        cfg.seed = derive_seed(rep_seed, {stream_tag("trader")});
        const FitResult fit = fit_trader(inst.target, sources, cfg);
        count(fit);
        auto rows = metrics_for("trader", setting, rep, fit.summary, inst.beta_true);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
      }
    } catch (const std::exception& e) {
      out.rows.clear();
      out.failure = e.what();
    }
  });

  BenchmarkResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].failure) {
      result.failures.push_back({static_cast<int>(i), *outcomes[i].failure});
      continue;
    }
    result.rows.insert(result.rows.end(), outcomes[i].rows.begin(), outcomes[i].rows.end());
    result.draws_checked += outcomes[i].draws;
  }
  std::stable_sort(result.rows.begin(), result.rows.end(), [](const MetricsReport& a, const MetricsReport& b) {
    return std::tie(a.replication, a.method, a.stratum) < std::tie(b.replication, b.method, b.stratum);
  });
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string metrics_csv(const std::vector<MetricsReport>& rows) {
  std::string out = "method,setting,stratum,replication,mse,avg_width,coverage,tpr,tnr,fpr,fpr_conventional,fpr_undefined\n";
  for (const auto& r : rows) {
    out += r.method + "," + std::to_string(r.setting) + "," + to_string(r.stratum) + "," +
           std::to_string(r.replication) + "," + format_metric(r.mse) + "," + format_metric(r.avg_width) + "," +
           format_metric(r.coverage) + "," + format_metric(r.tpr) + "," + format_metric(r.tnr) + "," +
           format_metric(r.fpr) + "," + format_metric(r.fpr_conventional) + "," + (r.fpr_undefined ? "1" : "0") +
           "\n";
  }
  return out;
}

std::vector<ReportRow> aggregate_metrics(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.pop_back();
      out.push_back(item);
    }
    return out;
  };
  if (!std::getline(in, line) || line.empty()) throw LoadError("empty metrics file");
  const auto header = split(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  for (const char* required : {"method", "setting", "stratum", "mse", "avg_width", "coverage"}) {
    if (!column(required)) throw LoadError(std::string("missing column \"") + required + "\"");
  }
  const std::vector<std::string> metric_names{"mse", "avg_width", "coverage", "tpr", "tnr", "fpr", "fpr_conventional"};

  using Key = std::tuple<std::string, std::string, std::string, std::size_t>;
  std::map<Key, std::vector<double>> groups;
  std::size_t n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw LoadError("ragged metrics row", n_rows + 2);
    ++n_rows;
    for (std::size_t m = 0; m < metric_names.size(); ++m) {
      const auto c = column(metric_names[m]);
      if (!c || f[*c] == "NA" || f[*c] == "nan") continue;
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(f[*c], &used);
        if (used != f[*c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw LoadError("malformed number in metrics row", n_rows + 1, *c + 1);
      }
      groups[{f[*column("method")], f[*column("setting")], f[*column("stratum")], m}].push_back(v);
    }
  }
  if (n_rows == 0) throw LoadError("metrics file has no rows");

  std::vector<ReportRow> out;
  for (const auto& [key, values] : groups) {
    ReportRow r;
    r.method = std::get<0>(key);
    r.setting = std::get<1>(key);
    r.stratum = std::get<2>(key);
    r.metric = metric_names[std::get<3>(key)];
    r.count = static_cast<long>(values.size());
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
      r.mean = values.front();
      r.sd = 0.0;
      out.push_back(r);
      continue;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    r.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    out.push_back(r);
  }
  return out;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "method,setting,stratum,metric,mean,sd,n\n";
  for (const auto& r : rows) {
    out += r.method + "," + r.setting + "," + r.stratum + "," + r.metric + "," + format_real(r.mean) + "," +
           format_real(r.sd) + "," + std::to_string(r.count) + "\n";
  }
  return out;
}

}  // namespace trader
