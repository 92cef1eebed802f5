#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "trader/core.hpp"
#include "trader/error.hpp"
#include "trader/evalbench.hpp"
#include "trader/guide.hpp"
#include "trader/sampler.hpp"
#include "trader/simgen.hpp"

namespace py = pybind11;
using namespace trader;

namespace {

TraderConfig make_config(std::uint64_t seed, int n_warmup, int n_samples, int n_chains, std::optional<double> psi_hat,
                         std::optional<double> tau) {
  TraderConfig c;
  c.seed = seed;
  c.n_warmup = n_warmup;
  c.n_samples = n_samples;
  c.n_chains = n_chains;
  c.psi_hat = psi_hat;
  c.tau_override = tau;
  c.validate();
  return c;
}

py::dict fit_to_dict(const FitResult& fit) {
  py::dict out;
  const auto n = static_cast<Eigen::Index>(fit.summary.size());
  Eigen::VectorXd mean(n), lower(n), upper(n), median(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& c = fit.summary.coef[static_cast<std::size_t>(j)];
    mean[j] = c.mean;
    median[j] = c.median;
    lower[j] = c.lower;
    upper[j] = c.upper;
  }
  out["mean"] = mean;
  out["median"] = median;
  out["lower"] = lower;
  out["upper"] = upper;
  out["tau"] = fit.guide.tau;
  out["theta"] = fit.guide.theta;
  out["n_fit_rows"] = fit.n_fit_rows;
  py::list chains;
  for (const auto& ch : fit.chains) {
    py::dict d;
    d["beta"] = ch.beta;
    d["sigma2"] = ch.sigma2;
    d["lambda"] = ch.lambda;
    d["eta"] = ch.eta;
    d["intercept"] = ch.intercept;
    chains.append(d);
  }
  out["chains"] = chains;
  return out;
}

}  // namespace

PYBIND11_MODULE(_trader, m) {
  m.doc() = "Source-guided horseshoe regression";

  m.def("select_tau", &select_tau, py::arg("p"), py::arg("n0"), py::arg("psi_hat"));
  m.def("expected_informative_count", &expected_informative_count, py::arg("tau"), py::arg("p"), py::arg("n0"));
  m.def("kappa", &kappa, py::arg("tau"), py::arg("lam"), py::arg("n0"));
  m.def("cosine_similarity", &cosine_similarity, py::arg("a"), py::arg("b"));
  m.def(
      "rescale_source",
      [](const Eigen::VectorXd& omega_hat, const Eigen::VectorXd& beta_val) {
        const auto r = rescale_source(omega_hat, beta_val);
        return py::make_tuple(r.omega_tilde, r.factor);
      },
      py::arg("omega_hat"), py::arg("beta_val"));

  m.def(
      "simulate",
      [](int setting, std::uint64_t seed, Eigen::Index n0, Eigen::Index nk, Eigen::Index p, Eigen::Index s,
         Eigen::Index K, Eigen::Index K_a, std::vector<double> scale_ratios, std::vector<double> correlations,
         bool pairwise) {
        SimSpec spec;
        spec.setting = static_cast<Setting>(setting);
        spec.n0 = n0;
        spec.nk = nk;
        spec.p = p;
        spec.s = s;
        spec.K = K;
        spec.K_a = K_a;
        spec.scale_ratios = std::move(scale_ratios);
        spec.correlations = std::move(correlations);
        spec.joint = pairwise ? Setting3Joint::Pairwise : Setting3Joint::Literal;
        spec.seed = seed;
        spec.validate();
        const SimInstance inst = generate(spec, seed);
        py::dict out;
        out["x"] = inst.target.x();
        out["y"] = inst.target.y();
        out["beta_true"] = inst.beta_true;
        py::list sources;
        for (const auto& d : inst.sources) sources.append(py::make_tuple(d.x(), d.y()));
        out["sources"] = sources;
        out["omega_true"] = inst.omega_true;
        return out;
      },
      py::arg("setting"), py::arg("seed"), py::arg("n0") = 120, py::arg("nk") = 120, py::arg("p") = 200,
      py::arg("s") = 20, py::arg("K") = 10, py::arg("K_a") = 0, py::arg("scale_ratios") = std::vector<double>{},
      py::arg("correlations") = std::vector<double>{}, py::arg("pairwise") = false);

  m.def(
      "fit_horseshoe",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed, int n_warmup, int n_samples,
         int n_chains, bool intercept, std::optional<double> psi_hat, std::optional<double> tau) {
        const auto config = make_config(seed, n_warmup, n_samples, n_chains, psi_hat, tau);
        return fit_to_dict(fit_horseshoe(Dataset::create(x, y, intercept), config));
      },
      py::arg("x"), py::arg("y"), py::arg("seed") = 0, py::arg("n_warmup") = 2000, py::arg("n_samples") = 2000,
      py::arg("n_chains") = 4, py::arg("intercept") = false, py::arg("psi_hat") = py::none(),
      py::arg("tau") = py::none());

  m.def(
      "fit_trader",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<Eigen::VectorXd>& sources,
         std::uint64_t seed, int n_warmup, int n_samples, int n_chains, bool intercept, std::optional<double> psi_hat,
         std::optional<double> tau) {
        const auto config = make_config(seed, n_warmup, n_samples, n_chains, psi_hat, tau);
        std::vector<SourceEstimate> est;
        for (std::size_t k = 0; k < sources.size(); ++k) {
          est.push_back({"source_" + std::to_string(k + 1), sources[k], std::nullopt});
        }
        return fit_to_dict(fit_trader(Dataset::create(x, y, intercept), est, config));
      },
      py::arg("x"), py::arg("y"), py::arg("sources"), py::arg("seed") = 0, py::arg("n_warmup") = 2000,
      py::arg("n_samples") = 2000, py::arg("n_chains") = 4, py::arg("intercept") = false,
      py::arg("psi_hat") = py::none(), py::arg("tau") = py::none());

  m.def(
      "metrics",
      [](const Eigen::VectorXd& mean, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
         const Eigen::VectorXd& beta_true) {
        PosteriorSummary summary;
        for (Eigen::Index j = 0; j < mean.size(); ++j) {
          CoefficientSummary c;
          c.mean = c.median = mean[j];
          c.lower = lower[j];
          c.upper = upper[j];
          c.selected = lower[j] > 0.0 || upper[j] < 0.0;
          summary.coef.push_back(c);
        }
        const auto iv = interval_metrics(summary, beta_true);
        py::dict out;
        out["mse"] = estimation_mse(mean, beta_true);
        out["coverage"] = iv.coverage;
        out["avg_width"] = iv.avg_width;
        return out;
      },
      py::arg("mean"), py::arg("lower"), py::arg("upper"), py::arg("beta_true"));

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
}
