#include "trader/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/student_t_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "trader/error.hpp"

namespace trader {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t id : path) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

std::uint64_t stream_tag(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double Rng::uniform() {
  boost::random::uniform_01<double> u;
  double v = u(engine_);
  while (v <= 0.0) v = u(engine_);
  return v;
}

double Rng::normal() {
  boost::random::normal_distribution<double> d(0.0, 1.0);
  return d(engine_);
}

double Rng::student_t(double dof) {
  boost::random::student_t_distribution<double> d(dof);
  return d(engine_);
}

int Rng::rademacher() { return uniform() < 0.5 ? -1 : 1; }

std::size_t Rng::uniform_index(std::size_t n) {
  boost::random::uniform_int_distribution<std::size_t> d(0, n - 1);
  return d(engine_);
}

double Rng::log_gamma_unit(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw NumericalError("gamma shape must be positive and finite");
  }
  if (shape >= 1.0) {
    boost::random::gamma_distribution<double> d(shape, 1.0);
    return std::log(d(engine_));
  }
  // G(a) = G(a + 1) * U^{1/a}
  boost::random::gamma_distribution<double> d(shape + 1.0, 1.0);
  return std::log(d(engine_)) + std::log(uniform()) / shape;
}

double Rng::gamma(double shape, double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw NumericalError("gamma rate must be positive and finite");
  return std::exp(log_gamma_unit(shape) - std::log(rate));
}

double Rng::inverse_gamma(double shape, double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw NumericalError("inverse-gamma rate must be positive and finite");
  }
  const double log_x = std::log(rate) - log_gamma_unit(shape);
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = std::numeric_limits<double>::max();
  return std::clamp(std::exp(log_x), lo, hi);
}

Eigen::VectorXd Rng::dirichlet(const Eigen::VectorXd& alpha) {
  Eigen::VectorXd logs(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) logs[i] = log_gamma_unit(alpha[i]);
  const double top = logs.maxCoeff();
  Eigen::VectorXd w = (logs.array() - top).exp();
  return w / w.sum();
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
  return z;
}

}  // namespace trader
