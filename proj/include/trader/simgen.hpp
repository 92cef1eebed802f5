#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trader/core.hpp"

namespace trader {

enum class Setting { I = 1, II = 2, III = 3 };

/// How Setting III couples the sources to each other.
///  - Literal: the (K+1)-dimensional joint normal with zero covariance
///    between sources. Feasible only when sum_k rho_k^2 <= 1.
///  - Pairwise: each source is correlated rho_k with beta and conditionally
///    independent of the others given beta. Always feasible.
enum class Setting3Joint { Literal, Pairwise };

struct SimSpec {
  Setting setting = Setting::I;
  Eigen::Index n0 = 120;
  Eigen::Index nk = 120;
  Eigen::Index p = 200;
  Eigen::Index s = 20;
  Eigen::Index K = 10;
  double h = 15.0;
  Eigen::Index K_a = 0;
  std::vector<double> scale_ratios;  // alpha_t / alpha_sk, Setting III
  std::vector<double> correlations;  // rho_k, Setting III
  double noise_sd = 1.0;
  double signal = 0.5;               // magnitude of the nonzero coefficients in Settings I and II
  double alpha_t = 0.0;              // Setting III target scale; <= 0 means signal * sqrt(s)
  Setting3Joint joint = Setting3Joint::Literal;
  std::uint64_t seed = 0;

  void validate() const;
  double target_scale() const;
  std::string to_json() const;
};

struct SimInstance {
  Dataset target;
  std::vector<Dataset> sources;
  Eigen::VectorXd beta_true;
  std::vector<Eigen::VectorXd> omega_true;
  Eigen::VectorXd intercepts_true;
  /// Setting II: the random support shift S(k) of each uninformative source (1-based indices).
  std::vector<std::vector<Eigen::Index>> shifted_support;
};

/// rho^{|j - j'|}.
Eigen::MatrixXd ar1_covariance(Eigen::Index p, double rho);

/// (K+1) x (K+1) joint covariance of (beta_j, omega_j^(1..K)) for Setting III.
Eigen::MatrixXd setting3_covariance(const SimSpec& spec);
/// True when the matrix is positive semidefinite up to a relative tolerance.
bool is_positive_semidefinite(const Eigen::MatrixXd& m);

SimInstance gen_setting1(const SimSpec& spec, std::uint64_t seed);
SimInstance gen_setting2(const SimSpec& spec, std::uint64_t seed);
SimInstance gen_setting3(const SimSpec& spec, std::uint64_t seed);
SimInstance generate(const SimSpec& spec, std::uint64_t seed);

/// Scale ratios of the Setting III(i) design.
std::vector<double> setting3_scale_ratios_i();

/// Writes target.csv, source_k.csv and truth.json into `dir`.
void save_instance(const SimInstance& inst, const SimSpec& spec, std::uint64_t seed, const std::string& dir);

}  // namespace trader
