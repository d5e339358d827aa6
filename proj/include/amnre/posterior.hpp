#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amnre/estimator.hpp"
#include "amnre/masking.hpp"
#include "amnre/prior.hpp"

namespace amnre {

/// Normalized density on a regular grid over one or two parameter coordinates.
/// Densities are row-major with the lower-index coordinate varying slowest.
struct MarginalHistogram {
  SubsetMask mask = SubsetMask::all(1);
  std::vector<double> lower, upper;  // one entry per selected coordinate
  std::size_t bins = 0;              // per axis
  std::vector<double> density;
  std::vector<std::string> warnings;

  /// Uninitialized-density grid over the prior's histogram bounds.
  static MarginalHistogram grid(const IndependentPrior& prior, const SubsetMask& mask, std::size_t bins) {
    if (mask.count() < 1 || mask.count() > 2) throw std::invalid_argument("histograms cover 1 or 2 coordinates");
    if (bins < 2) throw std::invalid_argument("histograms need at least 2 bins per axis");
    if (mask.dim() != prior.dim()) throw std::invalid_argument("mask and prior dimensions differ");
    MarginalHistogram h;
    h.mask = mask;
    for (std::size_t c : mask.coordinates()) {
      h.lower.push_back(prior.axes[c].lower());
      h.upper.push_back(prior.axes[c].upper());
    }
    h.bins = bins;
    h.density.assign(h.cell_count(), 0.0);
    return h;
  }

  std::size_t dims() const { return lower.size(); }
  std::size_t cell_count() const { return dims() == 1 ? bins : bins * bins; }
  double width(std::size_t axis) const { return (upper[axis] - lower[axis]) / static_cast<double>(bins); }
  double cell_volume() const { return dims() == 1 ? width(0) : width(0) * width(1); }
  double center(std::size_t axis, std::size_t k) const {
    return lower[axis] + (static_cast<double>(k) + 0.5) * width(axis);
  }

  /// Bin index along an axis, or -1 outside the grid.
  long locate(std::size_t axis, double v) const {
    if (!(v >= lower[axis] && v < upper[axis])) return -1;
    const auto k = static_cast<long>((v - lower[axis]) / width(axis));
    return std::min<long>(k, static_cast<long>(bins) - 1);
  }

  std::vector<double> masses() const {
    std::vector<double> m(density.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = density[i] * cell_volume();
    return m;
  }

  double total_mass() const {
    double s = 0.0;
    for (double d : density) s += d;
    return s * cell_volume();
  }

  void normalize() {
    const double total = total_mass();
    if (!(total > 0.0) || !std::isfinite(total)) throw std::runtime_error("histogram has no mass to normalize");
    for (double& d : density) d /= total;
  }

  bool same_grid(const MarginalHistogram& o) const {
    return mask == o.mask && lower == o.lower && upper == o.upper && bins == o.bins;
  }

  /// Header rows (mask, one `axis` row per coordinate), column names, then
  /// one row per cell: bin-center coordinates and density.
  void write_csv(std::ostream& out) const {
    const auto coords = mask.coordinates();
    out.precision(17);
    out << "mask," << mask.to_string() << '\n';
    for (std::size_t a = 0; a < dims(); ++a)
      out << "axis," << coords[a] + 1 << ',' << lower[a] << ',' << upper[a] << ',' << bins << '\n';
    for (std::size_t a = 0; a < dims(); ++a) out << "theta" << coords[a] + 1 << ',';
    out << "density\n";
    for (std::size_t i = 0; i < cell_count(); ++i) {
      if (dims() == 1) {
        out << center(0, i) << ',';
      } else {
        out << center(0, i / bins) << ',' << center(1, i % bins) << ',';
      }
      out << density[i] << '\n';
    }
  }
};

/// Surrogate marginal posterior p(theta_a | x) = r(theta_a, x, a) p(theta_a)
/// evaluated at bin centers and normalized in log space.
inline MarginalHistogram marginal_histogram(const RatioEstimator& est, const IndependentPrior& prior,
                                            std::span<const double> x, const SubsetMask& mask, std::size_t bins) {
  MarginalHistogram h = MarginalHistogram::grid(prior, mask, bins);
  const auto coords = mask.coordinates();
  const std::size_t cells = h.cell_count();
  const std::size_t width = est.input_size();
  std::vector<double> theta(prior.dim());
  for (std::size_t i = 0; i < prior.dim(); ++i) theta[i] = prior.axes[i].mean();

  std::vector<double> log_density(cells);
  constexpr std::size_t chunk = 4096;
  Matrix inputs;
  for (std::size_t start = 0; start < cells; start += chunk) {
    const std::size_t n = std::min(chunk, cells - start);
    inputs.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t cell = start + j;
      if (coords.size() == 1) {
        theta[coords[0]] = h.center(0, cell);
      } else {
        theta[coords[0]] = h.center(0, cell / bins);
        theta[coords[1]] = h.center(1, cell % bins);
      }
      est.encode(theta, x, mask, {inputs.col(static_cast<Eigen::Index>(j)).data(), width});
      log_density[cell] = marginal_log_prior(prior, theta, mask);
    }
    const RowVector lr = est.log_ratio_batch(inputs);
    for (std::size_t j = 0; j < n; ++j) log_density[start + j] += lr(static_cast<Eigen::Index>(j));
  }

  const double peak = *std::max_element(log_density.begin(), log_density.end());
  if (!std::isfinite(peak))
    throw std::runtime_error("surrogate grid has no finite mass (max log-density " + std::to_string(peak) + ")");
  double total = 0.0;
  for (std::size_t i = 0; i < cells; ++i) total += (h.density[i] = std::exp(log_density[i] - peak));
  const double norm = total * h.cell_volume();
  for (double& d : h.density) d /= norm;
  return h;
}

/// Mean of per-model densities on a shared grid, renormalized.
inline MarginalHistogram average_histograms(std::span<const MarginalHistogram> hists) {
  if (hists.empty()) throw std::invalid_argument("nothing to average");
  MarginalHistogram avg = hists.front();
  for (std::size_t k = 1; k < hists.size(); ++k) {
    if (!hists[k].same_grid(avg)) throw std::invalid_argument("cannot average histograms on different grids");
    for (std::size_t i = 0; i < avg.density.size(); ++i) avg.density[i] += hists[k].density[i];
  }
  avg.normalize();
  return avg;
}

/// Surrogate marginal averaged over independently trained estimators.
inline MarginalHistogram ensemble_histogram(std::span<const RatioEstimator> ensemble, const IndependentPrior& prior,
                                            std::span<const double> x, const SubsetMask& mask, std::size_t bins) {
  std::vector<MarginalHistogram> hists;
  for (const auto& est : ensemble) hists.push_back(marginal_histogram(est, prior, x, mask, bins));
  return hists.size() == 1 ? hists.front() : average_histograms(hists);
}

/// Density thresholds of the highest-density regions: for each credibility c,
/// the largest t such that cells with density >= t hold mass >= c.
inline std::vector<double> hpd_levels(const MarginalHistogram& h, std::span<const double> credibilities) {
  for (std::size_t i = 0; i < credibilities.size(); ++i) {
    if (!(credibilities[i] > 0.0 && credibilities[i] < 1.0))
      throw std::invalid_argument("credibility levels must lie in (0, 1)");
    if (i > 0 && credibilities[i] < credibilities[i - 1])
      throw std::invalid_argument("credibility levels must be ascending");
  }
  std::vector<double> sorted = h.density;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double vol = h.cell_volume();
  std::vector<double> out;
  std::size_t k = 0;
  double mass = 0.0;
  for (double c : credibilities) {
    while (k < sorted.size() && mass < c) {
      // take every cell tied at this density together
      const double level = sorted[k];
      while (k < sorted.size() && sorted[k] == level) mass += sorted[k++] * vol;
    }
    out.push_back(k == 0 ? sorted.front() : sorted[k - 1]);
  }
  return out;
}

/// Mass enclosed by the cells with density >= threshold.
inline double mass_above(const MarginalHistogram& h, double threshold) {
  double m = 0.0;
  for (double d : h.density)
    if (d >= threshold) m += d;
  return m * h.cell_volume();
}

struct ImportanceMarginal {
  MarginalHistogram hist;
  double effective_sample_size = 0.0;
  bool low_ess = false;
};

/// Self-normalized importance estimates of target marginals from the full-mask
/// surrogate: theta ~ prior, weight r(theta, x, 1), histogram of each target's
/// coordinates. All targets share the same weighted draws.
inline std::vector<ImportanceMarginal> marginalize_full(const RatioEstimator& est, const IndependentPrior& prior,
                                                        std::span<const double> x,
                                                        std::span<const SubsetMask> targets,
                                                        std::size_t mc_samples, Rng& rng, std::size_t bins) {
  const SubsetMask full = SubsetMask::all(prior.dim());
  for (const auto& t : targets)
    if (!full.contains(t)) throw std::invalid_argument("target mask must be a subset of the full mask");
  if (mc_samples < 1) throw std::invalid_argument("need at least one Monte Carlo sample");
  const std::size_t width = est.input_size();
  const std::size_t d = prior.dim();

  std::vector<double> thetas(mc_samples * d);
  std::vector<double> log_w(mc_samples);
  constexpr std::size_t chunk = 4096;
  Matrix inputs;
  for (std::size_t start = 0; start < mc_samples; start += chunk) {
    const std::size_t n = std::min(chunk, mc_samples - start);
    inputs.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
      std::span<double> theta(thetas.data() + (start + j) * d, d);
      prior.sample(rng, theta);
      est.encode(theta, x, full, {inputs.col(static_cast<Eigen::Index>(j)).data(), width});
    }
    const RowVector lr = est.log_ratio_batch(inputs);
    for (std::size_t j = 0; j < n; ++j) log_w[start + j] = lr(static_cast<Eigen::Index>(j));
  }
  const double peak = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(mc_samples);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    w[s] = std::exp(log_w[s] - peak);
    sum += w[s];
    sum_sq += w[s] * w[s];
  }
  const double ess = sum * sum / sum_sq;

  std::vector<ImportanceMarginal> out;
  for (const auto& target : targets) {
    ImportanceMarginal im{MarginalHistogram::grid(prior, target, bins), ess, ess < 50.0};
    auto& h = im.hist;
    const auto coords = target.coordinates();
    for (std::size_t s = 0; s < mc_samples; ++s) {
      const double* theta = thetas.data() + s * d;
      const long i0 = h.locate(0, theta[coords[0]]);
      if (i0 < 0) continue;
      if (coords.size() == 1) {
        h.density[static_cast<std::size_t>(i0)] += w[s];
      } else {
        const long i1 = h.locate(1, theta[coords[1]]);
        if (i1 >= 0) h.density[static_cast<std::size_t>(i0) * bins + static_cast<std::size_t>(i1)] += w[s];
      }
    }
    h.normalize();
    if (im.low_ess) h.warnings.push_back("effective sample size " + std::to_string(ess) + " < 50");
    out.push_back(std::move(im));
  }
  return out;
}

inline ImportanceMarginal marginalize_full(const RatioEstimator& est, const IndependentPrior& prior,
                                           std::span<const double> x, const SubsetMask& target,
                                           std::size_t mc_samples, Rng& rng, std::size_t bins) {
  return marginalize_full(est, prior, x, std::span<const SubsetMask>(&target, 1), mc_samples, rng, bins).front();
}

}  // namespace amnre
