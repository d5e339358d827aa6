#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "amnre/rng.hpp"

namespace amnre {

/// One coordinate of a product prior.
struct PriorAxis {
  enum class Kind { uniform, normal };

  Kind kind = Kind::uniform;
  double a = 0.0;  // uniform: lower bound; normal: mean
  double b = 1.0;  // uniform: upper bound; normal: standard deviation

  static PriorAxis uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static PriorAxis normal(double mean, double std) { return {Kind::normal, mean, std}; }

  /// Grid bounds used for histograms: the support, or mean +- 5 std.
  double lower() const { return kind == Kind::uniform ? a : a - 5.0 * b; }
  double upper() const { return kind == Kind::uniform ? b : a + 5.0 * b; }

  double mean() const { return kind == Kind::uniform ? 0.5 * (a + b) : a; }
  double stddev() const { return kind == Kind::uniform ? (b - a) / std::sqrt(12.0) : b; }

  /// Open support for the uniform case.
  double log_density(double v) const {
    if (kind == Kind::uniform) return (v > a && v < b) ? -std::log(b - a) : -INFINITY;
    const double z = (v - a) / b;
    return -0.5 * z * z - std::log(b) - 0.5 * std::log(2.0 * std::numbers::pi);
  }

  double sample(Rng& rng) const {
    if (kind == Kind::normal) return a + b * rng.normal();
    for (;;) {
      const double v = rng.uniform(a, b);
      if (v > a && v < b) return v;
    }
  }
};

/// Prior with independent coordinates; marginals over any subset are products of axes.
struct IndependentPrior {
  std::vector<PriorAxis> axes;

  std::size_t dim() const { return axes.size(); }

  double log_density(std::span<const double> theta) const {
    if (theta.size() != axes.size()) throw std::invalid_argument("prior: dimension mismatch");
    double lp = 0.0;
    for (std::size_t i = 0; i < axes.size(); ++i) lp += axes[i].log_density(theta[i]);
    return lp;
  }

  void sample(Rng& rng, std::span<double> out) const {
    for (std::size_t i = 0; i < axes.size(); ++i) out[i] = axes[i].sample(rng);
  }
};

}  // namespace amnre
