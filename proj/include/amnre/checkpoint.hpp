#pragma once

#include <cstdint>
#include <istream>
#include <ostream>

#include "amnre/adamw.hpp"
#include "amnre/binary_io.hpp"
#include "amnre/network.hpp"

namespace amnre {

// Network block: u64 layer-size count, u64 sizes, then parameters as f64,
// per layer weights row-major followed by biases.

inline void write_network(std::ostream& out, const DenseClassifier& net) {
  io::write_pod<std::uint64_t>(out, net.layer_sizes().size());
  for (int s : net.layer_sizes()) io::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(s));
  io::write_doubles(out, net.params().flatten());
}

inline DenseClassifier read_network(std::istream& in) {
  const auto n = io::read_pod<std::uint64_t>(in);
  if (n < 2 || n > 1024) throw FormatError("network block: implausible layer count");
  std::vector<int> sizes;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto s = io::read_pod<std::uint64_t>(in);
    if (s == 0 || s > (1u << 20)) throw FormatError("network block: implausible layer size");
    sizes.push_back(static_cast<int>(s));
  }
  DenseClassifier net(sizes);
  std::vector<double> flat(net.params().size());
  io::read_doubles(in, flat);
  net.params().unflatten(flat);
  if (!net.params().all_finite()) throw FormatError("network block: non-finite parameters");
  return net;
}

inline void write_optim_state(std::ostream& out, const OptimState& s) {
  const auto& c = s.config;
  for (double v : {c.learning_rate, c.weight_decay, c.beta1, c.beta2, c.epsilon}) io::write_pod(out, v);
  io::write_pod<std::uint64_t>(out, s.step);
  io::write_doubles(out, s.first_moment.flatten());
  io::write_doubles(out, s.second_moment.flatten());
}

inline OptimState read_optim_state(std::istream& in, const DenseClassifier& net) {
  OptimState s = OptimState::for_network(net, {});
  auto& c = s.config;
  for (double* v : {&c.learning_rate, &c.weight_decay, &c.beta1, &c.beta2, &c.epsilon}) *v = io::read_pod<double>(in);
  s.step = io::read_pod<std::uint64_t>(in);
  std::vector<double> flat(s.first_moment.size());
  io::read_doubles(in, flat);
  s.first_moment.unflatten(flat);
  io::read_doubles(in, flat);
  s.second_moment.unflatten(flat);
  return s;
}

}  // namespace amnre
