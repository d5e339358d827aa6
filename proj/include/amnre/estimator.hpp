#pragma once

#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amnre/binary_io.hpp"
#include "amnre/checkpoint.hpp"
#include "amnre/losses.hpp"
#include "amnre/masking.hpp"
#include "amnre/network.hpp"
#include "amnre/simulator.hpp"

namespace amnre {

/// Affine input normalization stored alongside the network.
struct Standardization {
  std::vector<double> theta_mean, theta_std;
  std::vector<double> x_mean, x_std;

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

/// Identifier of the input layout written into model files.
inline constexpr const char* mask_encoding = "theta*mask|mask|x;msb-first";

/// Mask-conditioned classifier whose logit is the marginal log-ratio
/// log p(theta_a | x) - log p(theta_a).
///
/// Network input is the concatenation [standardized theta * a | a | standardized x];
/// coordinates cleared by the mask are exactly zero, so their values never reach the network.
class RatioEstimator {
 public:
  RatioEstimator() = default;

  RatioEstimator(DenseClassifier net, std::size_t param_dim, std::size_t obs_dim, Standardization norm,
                 std::string simulator = "")
      : net_(std::move(net)), d_(param_dim), obs_(obs_dim), norm_(std::move(norm)), simulator_(std::move(simulator)) {
    if (net_.input_size() != static_cast<int>(input_size()))
      throw std::invalid_argument("estimator: network input must be 2*D + dim(x) = " + std::to_string(input_size()));
    if (norm_.theta_mean.size() != d_ || norm_.theta_std.size() != d_ || norm_.x_mean.size() != obs_ ||
        norm_.x_std.size() != obs_)
      throw std::invalid_argument("estimator: standardization constants have wrong sizes");
  }

  /// Fresh estimator for a simulator: theta scaled by the prior moments, x by the
  /// supplied sample moments (usually the training set).
  static RatioEstimator create(const Simulator& sim, int hidden_layers, int width, std::vector<double> x_mean,
                               std::vector<double> x_std, Rng& rng) {
    Standardization norm;
    for (const auto& axis : sim.prior().axes) {
      norm.theta_mean.push_back(axis.mean());
      norm.theta_std.push_back(axis.stddev());
    }
    norm.x_mean = std::move(x_mean);
    norm.x_std = std::move(x_std);
    const int in = static_cast<int>(2 * sim.param_dim() + sim.obs_dim());
    return {DenseClassifier::glorot(DenseClassifier::mlp_shape(in, hidden_layers, width), rng), sim.param_dim(),
            sim.obs_dim(), std::move(norm), sim.name()};
  }

  std::size_t param_dim() const { return d_; }
  std::size_t obs_dim() const { return obs_; }
  std::size_t input_size() const { return 2 * d_ + obs_; }
  const std::string& simulator() const { return simulator_; }
  const Standardization& standardization() const { return norm_; }
  const DenseClassifier& net() const { return net_; }
  DenseClassifier& net() { return net_; }

  /// Writes the network input for one (theta, x, a) triple into `column`.
  void encode(std::span<const double> theta, std::span<const double> x, const SubsetMask& mask,
              std::span<double> column) const {
    if (theta.size() != d_ || x.size() != obs_ || mask.dim() != d_ || column.size() != input_size())
      throw std::invalid_argument("estimator: input dimension mismatch");
    for (std::size_t i = 0; i < d_; ++i) {
      const bool on = mask.test(i);
      column[i] = on ? (theta[i] - norm_.theta_mean[i]) / norm_.theta_std[i] : 0.0;
      column[d_ + i] = on ? 1.0 : 0.0;
    }
    for (std::size_t j = 0; j < obs_; ++j) column[2 * d_ + j] = (x[j] - norm_.x_mean[j]) / norm_.x_std[j];
  }

  double log_ratio(std::span<const double> theta, std::span<const double> x, const SubsetMask& mask) const {
    Vector column(static_cast<Eigen::Index>(input_size()));
    encode(theta, x, mask, {column.data(), input_size()});
    return forward_batch(net_, column)(0);
  }

  /// Log-ratios for pre-encoded inputs stored as columns.
  RowVector log_ratio_batch(const Matrix& encoded) const { return forward_batch(net_, encoded); }

  /// Per-element contrastive loss: -log d(theta_a, x, a) - log(1 - d(theta'_a, x, a)).
  double pair_loss(std::span<const double> theta_joint, std::span<const double> theta_marg, std::span<const double> x,
                   const SubsetMask& mask) const {
    return softplus_losses(log_ratio(theta_joint, x, mask)).positive +
           softplus_losses(log_ratio(theta_marg, x, mask)).negative;
  }

  /// Unnormalized surrogate log-density of the masked coordinates.
  double surrogate_log_posterior(std::span<const double> theta, std::span<const double> x, const SubsetMask& mask,
                                 double log_prior_marg) const {
    return log_ratio(theta, x, mask) + log_prior_marg;
  }

  friend bool operator==(const RatioEstimator&, const RatioEstimator&) = default;

 private:
  DenseClassifier net_;
  std::size_t d_ = 0;
  std::size_t obs_ = 0;
  Standardization norm_;
  std::string simulator_;
};

/// Log-density of the prior marginal on the masked coordinates.
inline double marginal_log_prior(const IndependentPrior& prior, std::span<const double> theta,
                                 const SubsetMask& mask) {
  double lp = 0.0;
  for (std::size_t i : mask.coordinates()) lp += prior.axes[i].log_density(theta[i]);
  return lp;
}

// Model file: "AMNREMD1", simulator tag (16 bytes), mask encoding (32 bytes),
// u64 D, u64 dim(x), standardization constants (f64), then the network block.

inline void write_model(std::ostream& out, const RatioEstimator& est) {
  out.write("AMNREMD1", 8);
  io::write_fixed(out, est.simulator(), 16);
  io::write_fixed(out, mask_encoding, 32);
  io::write_pod<std::uint64_t>(out, est.param_dim());
  io::write_pod<std::uint64_t>(out, est.obs_dim());
  const auto& n = est.standardization();
  io::write_doubles(out, n.theta_mean);
  io::write_doubles(out, n.theta_std);
  io::write_doubles(out, n.x_mean);
  io::write_doubles(out, n.x_std);
  write_network(out, est.net());
}

inline RatioEstimator read_model(std::istream& in) {
  io::expect_magic(in, "AMNREMD1");
  std::string simulator = io::read_fixed(in, 16);
  if (io::read_fixed(in, 32) != mask_encoding) throw FormatError("model: unsupported input encoding");
  const auto d = io::read_pod<std::uint64_t>(in);
  const auto obs = io::read_pod<std::uint64_t>(in);
  if (d == 0 || d > SubsetMask::max_dim || obs == 0 || obs > (1u << 20)) throw FormatError("model: bad dimensions");
  Standardization n{std::vector<double>(d), std::vector<double>(d), std::vector<double>(obs), std::vector<double>(obs)};
  io::read_doubles(in, n.theta_mean);
  io::read_doubles(in, n.theta_std);
  io::read_doubles(in, n.x_mean);
  io::read_doubles(in, n.x_std);
  DenseClassifier net = read_network(in);
  try {
    return {std::move(net), d, obs, std::move(n), std::move(simulator)};
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

inline void save_model(const std::string& path, const RatioEstimator& est) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_model(out, est);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline RatioEstimator load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model '" + path + "'");
  return read_model(in);
}

}  // namespace amnre
