#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "amnre/network.hpp"

namespace amnre {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

struct OptimState {
  AdamWConfig config;
  ParamSet first_moment;
  ParamSet second_moment;
  std::uint64_t step = 0;

  static OptimState for_network(const DenseClassifier& net, AdamWConfig config) {
    return {config, ParamSet::zeros(net.layer_sizes()), ParamSet::zeros(net.layer_sizes()), 0};
  }

  friend bool operator==(const OptimState&, const OptimState&) = default;
};

/// One AdamW update with bias correction and decoupled weight decay.
/// Non-finite gradients leave both the network and the state untouched.
inline void adamw_step(DenseClassifier& net, const ParamSet& grads, OptimState& state) {
  ParamSet& params = net.params();
  if (grads.layers() != params.layers() || state.first_moment.layers() != params.layers())
    throw std::invalid_argument("adamw: gradient/state shapes do not match the network");
  for (std::size_t k = 0; k < params.layers(); ++k) {
    if (grads.weights[k].rows() != params.weights[k].rows() || grads.weights[k].cols() != params.weights[k].cols() ||
        grads.biases[k].size() != params.biases[k].size())
      throw std::invalid_argument("adamw: gradient shape mismatch in layer " + std::to_string(k));
  }
  if (!grads.all_finite()) throw std::domain_error("adamw: non-finite gradient, step rejected");

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double decay = 1.0 - c.learning_rate * c.weight_decay;

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    p *= decay;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    p.array() -= c.learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.epsilon);
  };
  for (std::size_t k = 0; k < params.layers(); ++k) {
    update(params.weights[k], grads.weights[k], state.first_moment.weights[k], state.second_moment.weights[k]);
    update(params.biases[k], grads.biases[k], state.first_moment.biases[k], state.second_moment.biases[k]);
  }
}

}  // namespace amnre
