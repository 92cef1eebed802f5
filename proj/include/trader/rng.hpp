#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace trader {

/// Mixes a master seed with a sequence of stream identifiers (splitmix64
/// finalizer). Distinct identifier paths give statistically independent
/// substreams; the mapping is fixed across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Stable 64-bit tag for a textual stream name (FNV-1a).
std::uint64_t stream_tag(std::string_view name);

/// Seedable 64-bit generator with the variates the samplers need. All
/// transformations are implemented on top of Boost.Random so draw sequences
/// are reproducible bit for bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                   // (0, 1), never exactly 0
  double normal();                    // N(0, 1)
  double student_t(double dof);
  int rademacher();
  std::size_t uniform_index(std::size_t n);  // {0, ..., n-1}

  /// log of a Gamma(shape, 1) variate. Stable for shapes far below one,
  /// where the variate itself underflows.
  double log_gamma_unit(double shape);
  double gamma(double shape, double rate);
  /// InverseGamma(shape, rate): density proportional to x^{-shape-1} exp(-rate/x).
  double inverse_gamma(double shape, double rate);
  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha);
  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace trader
