#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace amnre {

/// Seeded pseudo-random stream.
///
/// A stream is identified by (seed, stream id); two streams with the same pair
/// produce bit-identical sequences and distinct ids give independent streams.
/// The full state (engine and the cached normal deviate) round-trips through
/// `state()` / `set_state()` so training can be resumed exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x616d6e72u};
    engine_.seed(seq);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Child stream derived from this stream's identity, not its position.
  Rng child(std::uint64_t id) const { return Rng(seed_, mix(stream_ + 0x9e3779b97f4a7c15ull * (id + 1))); }

  std::uint64_t next_u64() { return engine_(); }

  // UniformRandomBitGenerator, for std::shuffle and friends
  using result_type = std::uint64_t;
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on the closed range [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(engine_);
  }

  double normal() { return normal_(engine_); }

  std::string state() const {
    std::ostringstream out;
    out << seed_ << ' ' << stream_ << ' ' << engine_ << ' ' << normal_;
    return out.str();
  }

  void set_state(const std::string& text) {
    std::istringstream in(text);
    in >> seed_ >> stream_ >> engine_ >> normal_;
    if (!in) throw std::runtime_error("rng: malformed state string");
  }

  friend bool operator==(const Rng& a, const Rng& b) { return a.state() == b.state(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace amnre
