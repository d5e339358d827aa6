#pragma once

#include <algorithm>
#include <cmath>

namespace amnre {

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Negative log-likelihoods of both classes for a classifier logit.
struct LogisticLosses {
  double positive;  // -log sigmoid(logit)
  double negative;  // -log(1 - sigmoid(logit))
};

inline LogisticLosses softplus_losses(double logit) { return {softplus(-logit), softplus(logit)}; }

}  // namespace amnre
