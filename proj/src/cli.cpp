#include "trader/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "trader/core.hpp"
#include "trader/error.hpp"
#include "trader/evalbench.hpp"
#include "trader/guide.hpp"
#include "trader/sampler.hpp"
#include "trader/simgen.hpp"

namespace trader::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Refuses to reuse a non-empty output directory unless forced.
void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ValidationError("output directory " + dir.string() + " is not empty (use --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

json base_manifest(const std::string& command, const std::vector<std::string>& args) {
  json m;
  m["command"] = command;
  m["args"] = args;
  m["software_version"] = TRADER_VERSION;
  m["started"] = timestamp();
  return m;
}

void finish_manifest(json& m, const fs::path& dir, const std::vector<std::string>& outputs) {
  m["finished"] = timestamp();
  m["outputs"] = outputs;
  if (!m.contains("failures")) m["failures"] = json::array();
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

int parse(CLI::App& app, const std::vector<std::string>& args) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return -1;
  } catch (const CLI::ParseError& e) {
    std::cerr << app.get_name() << ": " << e.what() << "\n";
    return kUsage;
  }
  return kSuccess;
}

// Shared flags that override TraderConfig fields.
struct ConfigFlags {
  std::string config_file;
  std::optional<int> n_warmup, n_samples, n_chains;
  std::optional<double> psi_hat, tau, ci_level, zeta, theta_floor;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "Flat key = value config file");
    app.add_option("--n-warmup", n_warmup);
    app.add_option("--n-samples", n_samples);
    app.add_option("--n-chains", n_chains);
    app.add_option("--psi-hat", psi_hat);
    app.add_option("--tau", tau, "Fix the global scale instead of selecting it");
    app.add_option("--ci-level", ci_level);
    app.add_option("--zeta", zeta);
    app.add_option("--theta-floor", theta_floor);
  }

  TraderConfig resolve(std::uint64_t seed) const {
    TraderConfig c;
    if (!config_file.empty()) c = load_config(config_file, c);
    if (n_warmup) c.n_warmup = *n_warmup;
    if (n_samples) c.n_samples = *n_samples;
    if (n_chains) c.n_chains = *n_chains;
    if (psi_hat) c.psi_hat = *psi_hat;
    if (tau) c.tau_override = *tau;
    if (ci_level) c.ci_level = *ci_level;
    if (zeta) c.zeta = *zeta;
    if (theta_floor) c.theta_floor = *theta_floor;
    c.seed = seed;
    c.validate();
    return c;
  }
};

struct SimFlags {
  int setting = 1;
  long n0 = 120, nk = 120, p = 200, s = 20, K = 10;
  std::optional<long> Ka;
  double h = 15.0;
  double noise_sd = 1.0;
  double signal = 0.5;
  double alpha_t = 0.0;
  std::vector<double> scale_ratios, rho;
  std::string joint = "literal";

  void attach(CLI::App& app) {
    app.add_option("--setting", setting, "Simulation design")->required()->check(CLI::IsMember({1, 2, 3}));
    app.add_option("--n0", n0);
    app.add_option("--nk", nk);
    app.add_option("--p", p);
    app.add_option("--s", s);
    app.add_option("--h,--perturbations", h, "Heterogeneity h of the source perturbations");
    app.add_option("--K", K);
    app.add_option("--Ka", Ka, "Informative sources (Setting 2)");
    app.add_option("--scale-ratios", scale_ratios, "alpha_t / alpha_sk per source (Setting 3)");
    app.add_option("--rho", rho, "Correlation with the target per source (Setting 3)");
    app.add_option("--noise-sd", noise_sd);
    app.add_option("--signal", signal, "Nonzero coefficient value (Settings 1-2)");
    app.add_option("--alpha-t", alpha_t, "Target scale (Setting 3)");
    app.add_option("--setting3-joint", joint)->check(CLI::IsMember({"literal", "pairwise"}));
  }

  SimSpec resolve(std::uint64_t seed) const {
    SimSpec spec;
    spec.setting = static_cast<Setting>(setting);
    spec.n0 = n0;
    spec.nk = nk;
    spec.p = p;
    spec.s = s;
    spec.K = K;
    spec.h = h;
    spec.noise_sd = noise_sd;
    spec.signal = signal;
    spec.alpha_t = alpha_t;
    spec.seed = seed;
    spec.joint = joint == "pairwise" ? Setting3Joint::Pairwise : Setting3Joint::Literal;
    if (spec.setting == Setting::II) {
      if (!Ka) throw ValidationError("--Ka is required for setting 2");
      spec.K_a = *Ka;
    }
    if (spec.setting == Setting::III) {
      auto broadcast = [this](std::vector<double> v, const char* name) {
        if (v.size() == 1) v.assign(static_cast<std::size_t>(K), v.front());
        if (static_cast<long>(v.size()) != K) {
          throw ValidationError(std::string(name) + " needs 1 or K values for setting 3");
        }
        return v;
      };
      spec.scale_ratios = broadcast(scale_ratios, "--scale-ratios");
      spec.correlations = broadcast(rho, "--rho");
    }
    spec.validate();
    return spec;
  }
};

template <typename Body>
int guarded(const char* command, Body&& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    std::cerr << command << ": numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace

int cmd_simulate(const std::vector<std::string>& args) {
  CLI::App app("Generate one simulated replication", "simulate");
  app.set_help_flag("--help", "Print this help message and exit");
  SimFlags sim;
  sim.attach(app);
  std::string out_dir;
  std::uint64_t seed = 0;
  bool force = false;
  app.add_option("--out", out_dir)->required();
  app.add_option("--seed", seed)->required();
  app.add_flag("--force", force);
  if (int rc = parse(app, args); rc != kSuccess) return rc < 0 ? kSuccess : rc;

  return guarded("simulate", [&] {
    const SimSpec spec = sim.resolve(seed);
    prepare_out_dir(out_dir, force);
    const SimInstance inst = generate(spec, seed);
    save_instance(inst, spec, seed, out_dir);
    json m = base_manifest("simulate", args);
    m["spec"] = json::parse(spec.to_json());
    m["master_seed"] = seed;
    std::vector<std::string> outputs{"target.csv", "truth.json"};
    for (std::size_t k = 0; k < inst.sources.size(); ++k) outputs.push_back("source_" + std::to_string(k + 1) + ".csv");
    finish_manifest(m, out_dir, outputs);
    return static_cast<int>(kSuccess);
  });
}

int cmd_fit(const std::vector<std::string>& args) {
  CLI::App app("Fit TRADER or the horseshoe baseline to a target dataset", "fit");
  app.set_help_flag("--help", "Print this help message and exit");
  ConfigFlags cfg_flags;
  cfg_flags.attach(app);
  std::string target, sources_path, out_dir, method;
  std::uint64_t seed = 0;
  bool force = false;
  bool intercept = false;
  int jobs = 1;
  app.add_option("--target", target)->required();
  app.add_option("--sources", sources_path);
  app.add_option("--out", out_dir)->required();
  app.add_option("--seed", seed)->required();
  app.add_option("--method", method)->required()->check(CLI::IsMember({"trader", "horseshoe"}));
  app.add_flag("--intercept", intercept, "Model an unpenalized intercept");
  app.add_option("--jobs", jobs, "Chains run concurrently")->check(CLI::PositiveNumber);
  app.add_flag("--force", force);
  if (int rc = parse(app, args); rc != kSuccess) return rc < 0 ? kSuccess : rc;

  return guarded("fit", [&] {
    if (method == "trader" && sources_path.empty()) throw ValidationError("--method trader requires --sources");
    const TraderConfig config = cfg_flags.resolve(seed);
    Dataset loaded = load_dataset(target);
    const Dataset data = Dataset::create(loaded.x(), loaded.y(), intercept);
    std::vector<SourceEstimate> sources;
    if (method == "trader") {
      sources = load_sources(sources_path);
      for (const auto& s : sources) {
        if (s.omega_hat.size() != data.p()) {
          throw ValidationError("dimension mismatch: source " + s.id + " has length " +
                                std::to_string(s.omega_hat.size()) + ", target has p = " + std::to_string(data.p()));
        }
      }
    }
    prepare_out_dir(out_dir, force);
    const FitResult fit = method == "trader" ? fit_trader(data, sources, config, jobs) : fit_horseshoe(data, config, jobs);
    const fs::path dir(out_dir);
    save_draws(fit.chains, dir / "draws");
    write_text(dir / "summary.csv", summary_csv(fit.summary));
    write_text(dir / "diagnostics.csv", diagnostics_csv(diagnostics(fit.chains)));
    std::vector<std::string> outputs{"draws/manifest.json", "summary.csv", "diagnostics.csv"};
    if (method == "trader") {
      write_text(dir / "guide.json", fit.guide.to_json());
      outputs.push_back("guide.json");
    }
    json m = base_manifest("fit", args);
    m["method"] = method;
    m["config"] = config.to_text();
    m["config_digest"] = config.digest();
    m["master_seed"] = seed;
    m["tau"] = fit.guide.tau;
    m["n_fit_rows"] = fit.n_fit_rows;
    finish_manifest(m, dir, outputs);
    return static_cast<int>(kSuccess);
  });
}

int cmd_bench(const std::vector<std::string>& args) {
  CLI::App app("Run a multi-replication benchmark", "bench");
  app.set_help_flag("--help", "Print this help message and exit");
  SimFlags sim;
  sim.attach(app);
  ConfigFlags cfg_flags;
  cfg_flags.attach(app);
  std::string out_dir;
  std::string methods_arg = "trader,horseshoe";
  std::uint64_t seed = 0;
  int reps = 1;
  int jobs = 1;
  bool strict = false;
  bool force = false;
  std::vector<int> inject;
  std::optional<int> src_warmup, src_samples, src_chains;
  app.add_option("--reps", reps)->required()->check(CLI::PositiveNumber);
  app.add_option("--methods", methods_arg);
  app.add_option("--out", out_dir)->required();
  app.add_option("--seed", seed)->required();
  app.add_option("--jobs", jobs)->check(CLI::PositiveNumber);
  app.add_flag("--strict", strict, "Exit nonzero when any replication fails");
  app.add_option("--inject-failure", inject, "Force the listed replications to fail (pipeline testing)");
  app.add_option("--source-n-warmup", src_warmup, "Warmup for the source fits (default: --n-warmup)");
  app.add_option("--source-n-samples", src_samples, "Retained draws for the source fits (default: --n-samples)");
  app.add_option("--source-n-chains", src_chains, "Chains for the source fits (default: --n-chains)");
  app.add_flag("--force", force);
  if (int rc = parse(app, args); rc != kSuccess) return rc < 0 ? kSuccess : rc;

  return guarded("bench", [&] {
    const SimSpec spec = sim.resolve(seed);
    const TraderConfig config = cfg_flags.resolve(seed);
    std::set<std::string> methods;
    std::stringstream ss(methods_arg);
    for (std::string m; std::getline(ss, m, ',');) {
      if (!m.empty()) methods.insert(m);
    }
    prepare_out_dir(out_dir, force);
    BenchmarkOptions options;
    options.jobs = jobs;
    options.inject_failures.insert(inject.begin(), inject.end());
    if (src_warmup || src_samples || src_chains) {
      TraderConfig sc = config;
      sc.n_warmup = src_warmup.value_or(config.n_warmup);
      sc.n_samples = src_samples.value_or(config.n_samples);
      sc.n_chains = src_chains.value_or(config.n_chains);
      options.source_config = sc;
    }
    const BenchmarkResult result = run_benchmark(spec, methods, reps, config, seed, options);
    const fs::path dir(out_dir);
    write_text(dir / "metrics.csv", metrics_csv(result.rows));
    json m = base_manifest("bench", args);
    m["spec"] = json::parse(spec.to_json());
    m["config"] = config.to_text();
    m["master_seed"] = seed;
    m["reps"] = reps;
    m["methods"] = std::vector<std::string>(methods.begin(), methods.end());
    m["wall_seconds"] = result.wall_seconds;
    m["draws_checked"] = result.draws_checked;
    m["failures"] = json::array();
    for (const auto& f : result.failures) m["failures"].push_back({{"replication", f.replication}, {"error", f.message}});
    m["failure_count"] = result.failures.size();
    finish_manifest(m, dir, {"metrics.csv"});
    if (!result.failures.empty()) {
      std::cerr << "bench: warning: " << result.failures.size() << " replication(s) failed\n";
      if (strict) return static_cast<int>(kNumerical);
    }
    return static_cast<int>(kSuccess);
  });
}

int cmd_report(const std::vector<std::string>& args) {
  CLI::App app("Aggregate metrics.csv into mean and sd per method", "report");
  app.set_help_flag("--help", "Print this help message and exit");
  std::string metrics, out_dir;
  bool force = false;
  app.add_option("--metrics", metrics)->required();
  app.add_option("--out", out_dir)->required();
  app.add_flag("--force", force);
  if (int rc = parse(app, args); rc != kSuccess) return rc < 0 ? kSuccess : rc;

  return guarded("report", [&] {
    const auto rows = aggregate_metrics(read_text(metrics));
    prepare_out_dir(out_dir, force);
    write_text(fs::path(out_dir) / "report.csv", report_csv(rows));
    json m = base_manifest("report", args);
    finish_manifest(m, out_dir, {"report.csv"});
    return static_cast<int>(kSuccess);
  });
}

int run(int argc, const char* const* argv) {
  const std::string usage =
      "usage: trader <simulate|fit|bench|report> [options]\n"
      "       trader <command> --help\n";
  if (argc < 2) {
    std::cerr << usage;
    return kUsage;
  }
  const std::string command = argv[1];
  std::vector<std::string> args(argv + 2, argv + argc);
  if (command == "simulate") return cmd_simulate(args);
  if (command == "fit") return cmd_fit(args);
  if (command == "bench") return cmd_bench(args);
  if (command == "report") return cmd_report(args);
  if (command == "--help" || command == "-h") {
    std::cout << usage;
    return kSuccess;
  }
  if (command == "--version") {
    std::cout << "trader " << TRADER_VERSION << "\n";
    return kSuccess;
  }
  std::cerr << "unknown command \"" << command << "\"\n" << usage;
  return kUsage;
}

}  // namespace trader::cli
