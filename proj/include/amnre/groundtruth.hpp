#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amnre/binary_io.hpp"
#include "amnre/config.hpp"
#include "amnre/parallel.hpp"
#include "amnre/posterior.hpp"
#include "amnre/prior.hpp"
#include "amnre/simulator.hpp"

namespace amnre {

struct McmcConfig {
  std::size_t chains = 8;
  std::size_t steps = 200000;  // per chain, burn-in included
  std::size_t burn_in = 20000;
  std::size_t thinning = 10;
  std::vector<double> proposal_std{0.3};  // one entry for all coordinates, or one per coordinate
  std::uint64_t seed = 0;
  /// Tune the proposal covariance during burn-in; it is frozen afterwards.
  bool adapt = true;

  void validate(std::size_t dim) const {
    if (chains < 1 || steps < 1 || thinning < 1) throw ConfigError("mcmc: chains, steps and thinning must be >= 1");
    if (burn_in >= steps) throw ConfigError("mcmc: burn_in must be smaller than steps");
    if (proposal_std.size() != 1 && proposal_std.size() != dim)
      throw ConfigError("mcmc: proposal_std needs 1 or D entries");
    for (double s : proposal_std)
      if (!(s > 0.0)) throw ConfigError("mcmc: proposal_std must be positive");
  }

  double step_size(std::size_t coord) const { return proposal_std.size() == 1 ? proposal_std[0] : proposal_std[coord]; }

  std::size_t kept_per_chain() const { return (steps - burn_in + thinning - 1) / thinning; }

  void apply(const KeyValues& kv) {
    for (const auto& [key, value] : kv) {
      if (key == "chains") chains = parse_value<std::size_t>(key, value);
      else if (key == "steps") steps = parse_value<std::size_t>(key, value);
      else if (key == "burn_in") burn_in = parse_value<std::size_t>(key, value);
      else if (key == "thinning") thinning = parse_value<std::size_t>(key, value);
      else if (key == "seed") seed = parse_value<std::uint64_t>(key, value);
      else if (key == "adapt") adapt = parse_value<int>(key, value) != 0;
      else if (key == "proposal_std") {
        proposal_std.clear();
        std::istringstream in(value);
        std::string item;
        while (std::getline(in, item, ',')) proposal_std.push_back(parse_value<double>(key, trim(item)));
      } else {
        throw ConfigError("unknown mcmc config key '" + key + "'");
      }
    }
  }

  friend bool operator==(const McmcConfig&, const McmcConfig&) = default;
};

/// Posterior draws for one observation, stored row-major.
struct SampleSet {
  std::size_t dim = 0;
  std::vector<double> samples;
  std::vector<double> acceptance_rates;  // per chain
  std::vector<double> observation;
  McmcConfig config;
  std::vector<std::string> warnings;

  std::size_t size() const { return dim == 0 ? 0 : samples.size() / dim; }
  std::span<const double> sample(std::size_t i) const { return {samples.data() + i * dim, dim}; }

  friend bool operator==(const SampleSet& a, const SampleSet& b) {
    return a.dim == b.dim && a.samples == b.samples && a.acceptance_rates == b.acceptance_rates &&
           a.observation == b.observation && a.config == b.config;
  }
};

/// Metropolis acceptance: accept with probability min(1, exp(delta_log_target)).
inline bool mh_accept(double delta_log_target, double u) { return std::log(u) < delta_log_target; }

using LogDensityFn = std::function<double(std::span<const double>)>;

/// Random-walk Metropolis with Gaussian proposals. Chains start from independent
/// prior draws and use their own streams (seed, chain), so results do not depend
/// on scheduling. Proposals with zero prior density are rejected through the target.
///
/// With `adapt`, burn-in runs in windows: after each window the proposal scale
/// moves toward 23.4% acceptance and, once enough moves were accepted, the
/// proposal covariance becomes the empirical covariance of the burn-in states.
/// The proposal is fixed after burn-in. Reported acceptance rates cover the
/// post-burn-in steps only.
inline SampleSet mh_sample(const LogDensityFn& log_target, const IndependentPrior& prior, const McmcConfig& cfg) {
  const std::size_t d = prior.dim();
  cfg.validate(d);
  SampleSet out;
  out.dim = d;
  out.config = cfg;
  const std::size_t kept = cfg.kept_per_chain();
  out.samples.assign(cfg.chains * kept * d, 0.0);
  out.acceptance_rates.assign(cfg.chains, 0.0);
  const auto n = static_cast<Eigen::Index>(d);
  const std::size_t window = std::max<std::size_t>(100, std::min<std::size_t>(2000, cfg.burn_in / 10));

  parallel_for(cfg.chains, [&](std::size_t c) {
    Rng rng(cfg.seed, c);
    Vector current(n), proposal(n), z(n);
    double current_lp;
    do {
      prior.sample(rng, {current.data(), d});
      current_lp = log_target({current.data(), d});
    } while (!std::isfinite(current_lp));

    Matrix chol = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) chol(i, i) = cfg.step_size(static_cast<std::size_t>(i));
    double scale = 1.0;
    bool empirical = false;
    // running moments of the current and the previous window
    Vector sum = Vector::Zero(n), prev_sum = Vector::Zero(n);
    Matrix outer = Matrix::Zero(n, n), prev_outer = Matrix::Zero(n, n);
    std::size_t window_accepted = 0, window_steps = 0, prev_accepted = 0;
    bool has_prev = false;

    std::size_t accepted = 0, stored = 0;
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
      proposal = current + scale * (chol * z);
      const double lp = log_target({proposal.data(), d});
      const bool accept = mh_accept(lp - current_lp, rng.uniform());
      if (accept) {
        current.swap(proposal);
        current_lp = lp;
      }
      if (t < cfg.burn_in) {
        if (!cfg.adapt) continue;
        window_accepted += accept;
        sum += current;
        outer.noalias() += current * current.transpose();
        if (++window_steps < window) continue;

        const double rate = static_cast<double>(window_accepted) / static_cast<double>(window);
        scale *= std::exp(std::clamp(3.0 * (rate - 0.234), -2.0, 2.0));
        if (window_accepted + prev_accepted >= 50) {
          const double count = static_cast<double>(has_prev ? 2 * window : window);
          const Vector mean = (sum + prev_sum) / count;
          Matrix cov = (outer + prev_outer) / count - mean * mean.transpose();
          cov.diagonal().array() += 1e-12;
          Eigen::LLT<Matrix> llt(cov);
          if (llt.info() == Eigen::Success) {
            if (!empirical) scale = 2.38 / std::sqrt(static_cast<double>(d));
            empirical = true;
            chol = llt.matrixL();
          }
        }
        prev_sum = sum;
        prev_outer = outer;
        prev_accepted = window_accepted;
        has_prev = true;
        sum.setZero();
        outer.setZero();
        window_accepted = window_steps = 0;
        continue;
      }
      accepted += accept;
      if ((t - cfg.burn_in) % cfg.thinning == 0) {
        std::copy(current.data(), current.data() + d, out.samples.begin() + static_cast<long>((c * kept + stored) * d));
        ++stored;
      }
    }
    out.acceptance_rates[c] = static_cast<double>(accepted) / static_cast<double>(cfg.steps - cfg.burn_in);
  });

  for (std::size_t c = 0; c < cfg.chains; ++c) {
    const double a = out.acceptance_rates[c];
    if (a < 0.05 || a > 0.7)
      out.warnings.push_back("chain " + std::to_string(c) + " acceptance rate " + std::to_string(a) +
                             " outside [0.05, 0.7]");
  }
  return out;
}

/// Ground-truth posterior of a simulator with a tractable likelihood.
inline SampleSet mh_sample(const Simulator& sim, std::span<const double> x, const McmcConfig& cfg) {
  const std::vector<double> obs(x.begin(), x.end());
  auto target = [&sim, &obs](std::span<const double> theta) {
    const double lp = sim.log_prior(theta);
    return std::isfinite(lp) ? lp + sim.log_likelihood(theta, obs) : lp;
  };
  SampleSet out = mh_sample(target, sim.prior(), cfg);
  out.observation = obs;
  return out;
}

/// Coordinates whose sign leaves the SLCP likelihood unchanged (theta3, theta4).
inline const std::vector<std::size_t> slcp_sign_symmetric_coords{2, 3};

/// Independently re-randomizes the sign of each listed coordinate of every sample.
inline SampleSet symmetrize(SampleSet samples, std::span<const std::size_t> coords, Rng& rng) {
  for (std::size_t s = 0; s < samples.size(); ++s)
    for (std::size_t c : coords)
      if (rng.uniform() < 0.5) samples.samples[s * samples.dim + c] = -samples.samples[s * samples.dim + c];
  return samples;
}

/// Normalized histogram of the masked coordinates, with `pseudo_count` added to
/// every cell so that no cell is empty.
inline MarginalHistogram sample_histogram(const SampleSet& samples, const IndependentPrior& prior,
                                          const SubsetMask& mask, std::size_t bins, double pseudo_count = 0.5) {
  MarginalHistogram h = MarginalHistogram::grid(prior, mask, bins);
  const auto coords = mask.coordinates();
  for (double& v : h.density) v = pseudo_count;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto theta = samples.sample(s);
    const long i0 = h.locate(0, theta[coords[0]]);
    if (i0 < 0) continue;
    if (coords.size() == 1) {
      h.density[static_cast<std::size_t>(i0)] += 1.0;
    } else {
      const long i1 = h.locate(1, theta[coords[1]]);
      if (i1 >= 0) h.density[static_cast<std::size_t>(i0) * bins + static_cast<std::size_t>(i1)] += 1.0;
    }
  }
  h.normalize();
  if (samples.size() < 1000) h.warnings.push_back("only " + std::to_string(samples.size()) + " samples");
  return h;
}

// Sample file: "AMNREGT1", u64 count, u64 D, u64 seed, u64 chains, u64 steps,
// u64 burn_in, u64 thinning, u64 adapt, u64 n_std, n_std f64 proposal std, u64 dim(x),
// dim(x) f64 observation, chains f64 acceptance rates, then count*D f64 samples.

inline void write_samples(std::ostream& out, const SampleSet& s) {
  const auto& c = s.config;
  out.write("AMNREGT1", 8);
  for (std::uint64_t v : {std::uint64_t{s.size()}, std::uint64_t{s.dim}, c.seed, std::uint64_t{c.chains},
                          std::uint64_t{c.steps}, std::uint64_t{c.burn_in}, std::uint64_t{c.thinning},
                          std::uint64_t{c.adapt}, std::uint64_t{c.proposal_std.size()}})
    io::write_pod(out, v);
  io::write_doubles(out, c.proposal_std);
  io::write_pod<std::uint64_t>(out, s.observation.size());
  io::write_doubles(out, s.observation);
  io::write_doubles(out, s.acceptance_rates);
  io::write_doubles(out, s.samples);
}

inline SampleSet read_samples(std::istream& in) {
  io::expect_magic(in, "AMNREGT1");
  SampleSet s;
  auto& c = s.config;
  const auto count = io::read_pod<std::uint64_t>(in);
  s.dim = io::read_pod<std::uint64_t>(in);
  c.seed = io::read_pod<std::uint64_t>(in);
  c.chains = io::read_pod<std::uint64_t>(in);
  c.steps = io::read_pod<std::uint64_t>(in);
  c.burn_in = io::read_pod<std::uint64_t>(in);
  c.thinning = io::read_pod<std::uint64_t>(in);
  c.adapt = io::read_pod<std::uint64_t>(in) != 0;
  const auto n_std = io::read_pod<std::uint64_t>(in);
  if (s.dim == 0 || s.dim > 62 || n_std > 62 || c.chains > (1u << 20) || count > (std::uint64_t{1} << 32))
    throw FormatError("sample file: implausible header");
  c.proposal_std.resize(n_std);
  io::read_doubles(in, c.proposal_std);
  const auto obs = io::read_pod<std::uint64_t>(in);
  if (obs > (1u << 20)) throw FormatError("sample file: implausible observation size");
  s.observation.resize(obs);
  io::read_doubles(in, s.observation);
  s.acceptance_rates.resize(c.chains);
  io::read_doubles(in, s.acceptance_rates);
  s.samples.resize(count * s.dim);
  io::read_doubles(in, s.samples);
  return s;
}

inline void save_samples(const std::string& path, const SampleSet& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_samples(out, s);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline SampleSet load_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open sample file '" + path + "'");
  return read_samples(in);
}

inline void export_samples_csv(std::ostream& out, const SampleSet& s) {
  for (std::size_t i = 0; i < s.dim; ++i) out << "theta" << i + 1 << (i + 1 < s.dim ? ',' : '\n');
  out << std::setprecision(17);
  for (std::size_t k = 0; k < s.size(); ++k)
    for (std::size_t i = 0; i < s.dim; ++i) out << s.samples[k * s.dim + i] << (i + 1 < s.dim ? ',' : '\n');
}

}  // namespace amnre
