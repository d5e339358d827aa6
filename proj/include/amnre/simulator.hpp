#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include "amnre/prior.hpp"
#include "amnre/rng.hpp"

namespace amnre {

/// A stochastic forward model with a product prior. The likelihood is only
/// required for simulators used as ground-truth references.
class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual std::string name() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual const IndependentPrior& prior() const = 0;
  virtual void simulate(std::span<const double> theta, Rng& rng, std::span<double> x) const = 0;
  virtual double log_likelihood(std::span<const double> theta, std::span<const double> x) const = 0;

  double log_prior(std::span<const double> theta) const { return prior().log_density(theta); }
  void sample_prior(Rng& rng, std::span<double> theta) const { prior().sample(rng, theta); }
};

namespace slcp {

inline constexpr std::size_t param_dim = 5;
inline constexpr std::size_t obs_dim = 8;
inline constexpr double bound = 3.0;
/// Added to both variances before evaluating densities.
inline constexpr double covariance_jitter = 1e-12;

using ParamVector = std::array<double, param_dim>;
using Observation = std::array<double, obs_dim>;  // (z1x, z1y, ..., z4x, z4y)

inline const IndependentPrior& prior() {
  static const IndependentPrior p{std::vector<PriorAxis>(param_dim, PriorAxis::uniform(-bound, bound))};
  return p;
}

inline ParamVector sample_prior(Rng& rng) {
  ParamVector theta;
  prior().sample(rng, theta);
  return theta;
}

inline double log_prior(std::span<const double> theta) { return prior().log_density(theta); }

/// Mean and covariance entries of the per-point Gaussian.
struct PointLaw {
  double mu_x, mu_y;
  double s1, s2, rho;  // scale factors and correlation
  double var_x() const { return s1 * s1; }
  double var_y() const { return s2 * s2; }
  double cov() const { return rho * s1 * s2; }
};

inline PointLaw point_law(std::span<const double> theta) {
  if (theta.size() != param_dim) throw std::invalid_argument("slcp: theta must have 5 coordinates");
  return {theta[0], theta[1], theta[2] * theta[2], theta[3] * theta[3], std::tanh(theta[4])};
}

inline void simulate(std::span<const double> theta, Rng& rng, std::span<double> x) {
  if (x.size() != obs_dim) throw std::invalid_argument("slcp: observation must have 8 entries");
  const PointLaw law = point_law(theta);
  // lower-triangular factor of the covariance
  const double l11 = law.s1;
  const double l21 = law.rho * law.s2;
  const double l22 = law.s2 * std::sqrt(1.0 - law.rho * law.rho);
  for (std::size_t j = 0; j < 4; ++j) {
    const double u1 = rng.normal();
    const double u2 = rng.normal();
    x[2 * j] = law.mu_x + l11 * u1;
    x[2 * j + 1] = law.mu_y + l21 * u1 + l22 * u2;
  }
}

inline Observation simulate(const ParamVector& theta, Rng& rng) {
  Observation x;
  simulate(theta, rng, x);
  return x;
}

inline double log_likelihood(std::span<const double> theta, std::span<const double> x) {
  if (x.size() != obs_dim) throw std::invalid_argument("slcp: observation must have 8 entries");
  const PointLaw law = point_law(theta);
  const double a = law.var_x() + covariance_jitter;
  const double d = law.var_y() + covariance_jitter;
  const double c = law.cov();
  const double det = a * d - c * c;
  const double log_norm = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det);
  double total = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    const double dx = x[2 * j] - law.mu_x;
    const double dy = x[2 * j + 1] - law.mu_y;
    const double quad = (d * dx * dx - 2.0 * c * dx * dy + a * dy * dy) / det;
    total += log_norm - 0.5 * quad;
  }
  return total;
}

}  // namespace slcp

class SlcpSimulator final : public Simulator {
 public:
  std::string name() const override { return "slcp"; }
  std::size_t param_dim() const override { return slcp::param_dim; }
  std::size_t obs_dim() const override { return slcp::obs_dim; }
  const IndependentPrior& prior() const override { return slcp::prior(); }
  void simulate(std::span<const double> theta, Rng& rng, std::span<double> x) const override {
    slcp::simulate(theta, rng, x);
  }
  double log_likelihood(std::span<const double> theta, std::span<const double> x) const override {
    return slcp::log_likelihood(theta, x);
  }
};

/// Conjugate toy model: theta ~ N(0, 1), x | theta ~ N(theta, 1).
/// The posterior is N(x / 2, 1 / 2) and the evidence is N(x; 0, 2).
class GaussianToySimulator final : public Simulator {
 public:
  std::string name() const override { return "gauss1d"; }
  std::size_t param_dim() const override { return 1; }
  std::size_t obs_dim() const override { return 1; }
  const IndependentPrior& prior() const override { return prior_; }
  void simulate(std::span<const double> theta, Rng& rng, std::span<double> x) const override {
    x[0] = theta[0] + rng.normal();
  }
  double log_likelihood(std::span<const double> theta, std::span<const double> x) const override {
    return log_normal(x[0], theta[0], 1.0);
  }

  static double log_normal(double v, double mean, double var) {
    const double d = v - mean;
    return -0.5 * d * d / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
  }

  static double exact_log_ratio(double theta, double x) { return log_normal(x, theta, 1.0) - log_normal(x, 0.0, 2.0); }

 private:
  IndependentPrior prior_{{PriorAxis::normal(0.0, 1.0)}};
};

inline std::unique_ptr<Simulator> make_simulator(const std::string& name) {
  if (name == "slcp") return std::make_unique<SlcpSimulator>();
  if (name == "gauss1d") return std::make_unique<GaussianToySimulator>();
  throw std::invalid_argument("unknown simulator '" + name + "' (expected slcp or gauss1d)");
}

}  // namespace amnre
