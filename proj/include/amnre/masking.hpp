#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amnre/rng.hpp"

namespace amnre {

/// Nonzero binary mask over the D parameter coordinates.
///
/// Stored as an integer bitset whose binary representation, most significant
/// bit first, reads as coordinates 0..D-1; "10100" selects coordinates 0 and 2.
class SubsetMask {
 public:
  static constexpr std::size_t max_dim = 62;

  SubsetMask(std::uint64_t bits, std::size_t dim) : bits_(bits), dim_(dim) {
    if (dim == 0 || dim > max_dim) throw std::invalid_argument("mask dimension must be in [1, 62]");
    if (bits == 0) throw std::invalid_argument("the empty mask is not a valid subset");
    if (bits >> dim) throw std::invalid_argument("mask has bits beyond its dimension");
  }

  static SubsetMask all(std::size_t dim) { return {(std::uint64_t{1} << dim) - 1, dim}; }

  static SubsetMask from_coordinates(std::span<const std::size_t> coords, std::size_t dim) {
    std::uint64_t bits = 0;
    for (std::size_t c : coords) {
      if (c >= dim) throw std::invalid_argument("mask coordinate out of range");
      bits |= std::uint64_t{1} << (dim - 1 - c);
    }
    return {bits, dim};
  }

  static SubsetMask parse(const std::string& text) {
    if (text.empty() || text.size() > max_dim) throw std::invalid_argument("bad mask string '" + text + "'");
    std::uint64_t bits = 0;
    for (char ch : text) {
      if (ch != '0' && ch != '1') throw std::invalid_argument("bad mask string '" + text + "'");
      bits = (bits << 1) | static_cast<std::uint64_t>(ch == '1');
    }
    return {bits, text.size()};
  }

  std::uint64_t bits() const { return bits_; }
  std::size_t dim() const { return dim_; }
  std::size_t count() const { return static_cast<std::size_t>(std::popcount(bits_)); }

  bool test(std::size_t coord) const { return (bits_ >> (dim_ - 1 - coord)) & 1u; }

  std::vector<std::size_t> coordinates() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dim_; ++i)
      if (test(i)) out.push_back(i);
    return out;
  }

  bool contains(const SubsetMask& other) const { return (other.bits_ & ~bits_) == 0; }

  std::string to_string() const {
    std::string s(dim_, '0');
    for (std::size_t i = 0; i < dim_; ++i)
      if (test(i)) s[i] = '1';
    return s;
  }

  /// 0.0 / 1.0 encoding fed to the network.
  void write_reals(std::span<double> out) const {
    for (std::size_t i = 0; i < dim_; ++i) out[i] = test(i) ? 1.0 : 0.0;
  }

  friend bool operator==(const SubsetMask&, const SubsetMask&) = default;

 private:
  std::uint64_t bits_;
  std::size_t dim_;
};

/// Uniform over the 2^D - 1 nonzero masks.
inline SubsetMask sample_mask(Rng& rng, std::size_t dim) {
  if (dim == 0 || dim > SubsetMask::max_dim) throw std::invalid_argument("sample_mask: D must be in [1, 62]");
  return {rng.uniform_int(1, (std::uint64_t{1} << dim) - 1), dim};
}

/// Mask distribution used by the trainer.
using MaskSampler = std::function<SubsetMask(Rng&)>;

inline MaskSampler uniform_mask_sampler(std::size_t dim) {
  return [dim](Rng& rng) { return sample_mask(rng, dim); };
}

inline std::vector<double> apply_mask(std::span<const double> theta, const SubsetMask& mask) {
  if (theta.size() != mask.dim()) throw std::invalid_argument("apply_mask: length mismatch");
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) out[i] = mask.test(i) ? theta[i] : 0.0;
  return out;
}

/// All nonzero masks in ascending integer order; `subset_size` 0 keeps every size.
inline std::vector<SubsetMask> enumerate_masks(std::size_t dim, std::size_t subset_size = 0) {
  if (dim == 0 || dim > 20) throw std::invalid_argument("enumerate_masks: D must be in [1, 20]");
  std::vector<SubsetMask> out;
  for (std::uint64_t b = 1; b < (std::uint64_t{1} << dim); ++b)
    if (subset_size == 0 || static_cast<std::size_t>(std::popcount(b)) == subset_size) out.emplace_back(b, dim);
  return out;
}

/// Singletons followed by pairs, the grids used for marginal plots.
inline std::vector<SubsetMask> masks_1d_2d(std::size_t dim) {
  auto out = enumerate_masks(dim, 1);
  if (dim >= 2) {
    auto pairs = enumerate_masks(dim, 2);
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  return out;
}

}  // namespace amnre
