#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "amnre/datastore.hpp"
#include "amnre/estimator.hpp"
#include "amnre/posterior.hpp"

namespace amnre {

/// KL(p || q) in nats over cell masses; cells where p is zero contribute nothing.
inline double kl_divergence(const MarginalHistogram& p, const MarginalHistogram& q) {
  if (!p.same_grid(q)) throw std::invalid_argument("kl_divergence: histograms are on different grids");
  const auto pm = p.masses(), qm = q.masses();
  double kl = 0.0;
  for (std::size_t i = 0; i < pm.size(); ++i) {
    if (pm[i] <= 0.0) continue;
    if (qm[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += pm[i] * std::log(pm[i] / qm[i]);
  }
  return std::max(kl, 0.0);
}

inline double total_variation(const MarginalHistogram& p, const MarginalHistogram& q) {
  if (!p.same_grid(q)) throw std::invalid_argument("total_variation: histograms are on different grids");
  const auto pm = p.masses(), qm = q.masses();
  double tv = 0.0;
  for (std::size_t i = 0; i < pm.size(); ++i) tv += std::abs(pm[i] - qm[i]);
  return 0.5 * tv;
}

/// Randomized probability integral transform of `value` under a 1d histogram:
/// mass strictly below its cell plus the fraction `u` of the cell's own mass.
inline double randomized_pit(const MarginalHistogram& h, double value, double u) {
  if (h.dims() != 1) throw std::invalid_argument("percentiles need a 1d histogram");
  if (value < h.lower[0]) return 0.0;
  if (value >= h.upper[0]) return 1.0;
  const auto k = static_cast<std::size_t>(h.locate(0, value));
  double below = 0.0;
  for (std::size_t i = 0; i < k; ++i) below += h.density[i];
  return std::clamp((below + u * h.density[k]) * h.cell_volume(), 0.0, 1.0);
}

/// Percentile of theta*_coord in the surrogate marginal p(theta_coord | x*),
/// averaged over an ensemble of estimators.
inline double percentile(std::span<const RatioEstimator> ensemble, const IndependentPrior& prior,
                         std::span<const double> theta_star, std::span<const double> x_star, std::size_t coord,
                         std::size_t bins, Rng& rng) {
  const auto mask = SubsetMask::from_coordinates(std::span<const std::size_t>(&coord, 1), prior.dim());
  return randomized_pit(ensemble_histogram(ensemble, prior, x_star, mask, bins), theta_star[coord], rng.uniform());
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and Uniform(0, 1).
inline double ks_uniform(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("ks_uniform: no values");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - v, v - static_cast<double>(i) / n});
  }
  return d;
}

/// Critical KS distance at the 95% level, asymptotic form.
inline double ks_critical_95(std::size_t n) { return 1.36 / std::sqrt(static_cast<double>(n)); }

struct CalibrationCurve {
  std::size_t coordinate = 0;
  std::vector<double> sorted_percentiles;
  double ks = 0.0;
};

/// Percentiles of the true parameters in their 1d surrogate marginals for the
/// first `count` pairs of a test set, one curve per coordinate.
///
/// Uniform percentiles only show that the surrogate averages back to the prior;
/// the prior itself passes, so this does not establish posterior accuracy.
inline std::vector<CalibrationCurve> calibration_cdf(std::span<const RatioEstimator> ensemble,
                                                     const IndependentPrior& prior, const Dataset& test,
                                                     std::size_t count, std::size_t bins, std::uint64_t seed) {
  if (count < 100) throw std::invalid_argument("calibration needs at least 100 pairs");
  if (count > test.size()) throw std::invalid_argument("calibration: test set too small");
  std::vector<CalibrationCurve> curves(prior.dim());
  for (std::size_t c = 0; c < prior.dim(); ++c) {
    curves[c].coordinate = c;
    curves[c].sorted_percentiles.resize(count);
  }
  parallel_for(count, [&](std::size_t i) {
    Rng rng(seed, i);
    for (std::size_t c = 0; c < prior.dim(); ++c)
      curves[c].sorted_percentiles[i] = percentile(ensemble, prior, test.theta(i), test.x(i), c, bins, rng);
  });
  for (auto& curve : curves) {
    std::sort(curve.sorted_percentiles.begin(), curve.sorted_percentiles.end());
    curve.ks = ks_uniform(curve.sorted_percentiles);
  }
  return curves;
}

inline void write_calibration_csv(std::ostream& out, std::span<const CalibrationCurve> curves) {
  out << "coordinate,rank,percentile,ks\n";
  out.precision(17);
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.sorted_percentiles.size(); ++i)
      out << c.coordinate + 1 << ',' << i << ',' << c.sorted_percentiles[i] << ',' << c.ks << '\n';
}

/// Per-cell classifier loss of the masked objective:
/// joint * (-log q) + marginal * (-log(1 - q)), with 0 * inf taken as 0.
inline double cell_loss(double joint, double marginal, double q) {
  double l = 0.0;
  if (joint > 0.0) l += joint * -std::log(q);
  if (marginal > 0.0) l += marginal * -std::log1p(-q);
  return l;
}

struct OracleCell {
  std::size_t row = 0, col = 0;
  double numeric = 0.0;
  double closed_form = 0.0;
};

/// For a discrete joint table p(theta_a, x) (rows theta_a, columns x), finds the
/// loss-minimizing classifier value of every cell by grid search with
/// refinement, alongside the closed form p(theta_a, x) / (p(theta_a, x) + p(theta_a) p(x)).
/// Cells with p(theta_a) p(x) = 0 are skipped.
inline std::vector<OracleCell> bayes_optimal_oracle(const std::vector<std::vector<double>>& table) {
  if (table.empty() || table.size() > 16) throw std::invalid_argument("oracle: 1..16 rows required");
  const std::size_t cols = table.front().size();
  if (cols == 0 || cols > 16) throw std::invalid_argument("oracle: 1..16 columns required");
  std::vector<double> row_marg(table.size(), 0.0), col_marg(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].size() != cols) throw std::invalid_argument("oracle: ragged table");
    for (std::size_t j = 0; j < cols; ++j) {
      if (table[i][j] < 0.0) throw std::invalid_argument("oracle: negative probability");
      row_marg[i] += table[i][j];
      col_marg[j] += table[i][j];
      total += table[i][j];
    }
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("oracle: table must sum to 1");

  std::vector<OracleCell> out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double joint = table[i][j];
      const double marginal = row_marg[i] * col_marg[j];
      if (!(marginal > 0.0)) continue;
      double lo = 0.0, hi = 1.0, best = 0.0;
      for (int round = 0; round < 40; ++round) {
        constexpr int points = 20;
        double best_loss = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= points; ++k) {
          const double q = lo + (hi - lo) * k / points;
          const double l = cell_loss(joint, marginal, q);
          if (l < best_loss) {
            best_loss = l;
            best = q;
          }
        }
        const double step = (hi - lo) / points;
        lo = std::max(0.0, best - step);
        hi = std::min(1.0, best + step);
      }
      out.push_back({i, j, best, joint / (joint + marginal)});
    }
  }
  return out;
}

/// Masks with KL in both directions for one observation.
struct KlRow {
  SubsetMask mask;
  double forward;  // KL(truth || surrogate)
  double reverse;  // KL(surrogate || truth)
};

inline void write_kl_csv(std::ostream& out, std::span<const KlRow> rows) {
  out << "mask,kl_forward,kl_reverse\n";
  out.precision(17);
  for (const auto& r : rows) out << r.mask.to_string() << ',' << r.forward << ',' << r.reverse << '\n';
}

}  // namespace amnre
