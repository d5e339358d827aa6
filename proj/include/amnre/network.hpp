#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amnre/rng.hpp"

namespace amnre {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

/// Weights and biases of a dense network, one entry per layer. Also used for
/// gradients and optimizer moments, which share the parameter shapes.
struct ParamSet {
  std::vector<Matrix> weights;  // layer k: (size[k+1], size[k])
  std::vector<Vector> biases;   // layer k: size[k+1]

  static ParamSet zeros(const std::vector<int>& layer_sizes) {
    ParamSet p;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
      p.weights.push_back(Matrix::Zero(layer_sizes[k + 1], layer_sizes[k]));
      p.biases.push_back(Vector::Zero(layer_sizes[k + 1]));
    }
    return p;
  }

  std::size_t layers() const { return weights.size(); }

  std::size_t size() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < layers(); ++k) n += weights[k].size() + biases[k].size();
    return n;
  }

  void set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  bool all_finite() const {
    for (std::size_t k = 0; k < layers(); ++k)
      if (!weights[k].allFinite() || !biases[k].allFinite()) return false;
    return true;
  }

  /// Flattened copy in checkpoint order: per layer, weights row-major then biases.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(size());
    for (std::size_t k = 0; k < layers(); ++k) {
      for (Eigen::Index r = 0; r < weights[k].rows(); ++r)
        for (Eigen::Index c = 0; c < weights[k].cols(); ++c) flat.push_back(weights[k](r, c));
      for (Eigen::Index r = 0; r < biases[k].size(); ++r) flat.push_back(biases[k](r));
    }
    return flat;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != size()) throw std::invalid_argument("parameter vector has wrong length");
    std::size_t i = 0;
    for (std::size_t k = 0; k < layers(); ++k) {
      for (Eigen::Index r = 0; r < weights[k].rows(); ++r)
        for (Eigen::Index c = 0; c < weights[k].cols(); ++c) weights[k](r, c) = flat[i++];
      for (Eigen::Index r = 0; r < biases[k].size(); ++r) biases[k](r) = flat[i++];
    }
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Feed-forward network with ELU hidden layers and a single linear output unit.
class DenseClassifier {
 public:
  DenseClassifier() = default;

  explicit DenseClassifier(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs an input and an output layer");
    for (int s : sizes_)
      if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
    if (sizes_.back() != 1) throw std::invalid_argument("network output must be a scalar logit");
    params_ = ParamSet::zeros(sizes_);
  }

  /// Layers drawn uniformly in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static DenseClassifier glorot(std::vector<int> layer_sizes, Rng& rng) {
    DenseClassifier net(std::move(layer_sizes));
    for (auto& w : net.params_.weights) {
      const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
    }
    return net;
  }

  /// Input width, hidden widths and the final 1.
  static std::vector<int> mlp_shape(int input, int hidden_layers, int width) {
    std::vector<int> sizes{input};
    sizes.insert(sizes.end(), static_cast<std::size_t>(hidden_layers), width);
    sizes.push_back(1);
    return sizes;
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  std::size_t layers() const { return params_.layers(); }

  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }

  friend bool operator==(const DenseClassifier&, const DenseClassifier&) = default;

 private:
  std::vector<int> sizes_;
  ParamSet params_;
};

/// Activations kept by `forward_batch` for the backward pass.
struct ForwardCache {
  std::vector<Matrix> activations;  // activations[0] is the input, then each layer's output
};

/// Logits for a batch of inputs stored as columns.
inline RowVector forward_batch(const DenseClassifier& net, const Matrix& inputs, ForwardCache* cache = nullptr) {
  if (inputs.rows() != net.input_size())
    throw std::invalid_argument("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                                std::to_string(net.input_size()));
  const auto& p = net.params();
  const std::size_t L = net.layers();
  if (cache) {
    cache->activations.resize(L + 1);
    cache->activations[0] = inputs;
  }
  Matrix a = inputs;
  for (std::size_t k = 0; k < L; ++k) {
    Matrix z = p.weights[k] * a;
    z.colwise() += p.biases[k];
    if (k + 1 < L) z = z.unaryExpr([](double v) { return elu(v); });
    a = std::move(z);
    if (cache) cache->activations[k + 1] = a;
  }
  return a.row(0);
}

/// Accumulates sum_j upstream_j * d logit_j / d params into `grads`.
inline void backward_batch(const DenseClassifier& net, const ForwardCache& cache, const RowVector& upstream,
                           ParamSet& grads) {
  const auto& p = net.params();
  const std::size_t L = net.layers();
  if (cache.activations.size() != L + 1 || cache.activations[0].cols() != upstream.size())
    throw std::invalid_argument("backward pass does not match the cached forward pass");
  Matrix delta = upstream;
  for (std::size_t k = L; k-- > 0;) {
    grads.weights[k].noalias() += delta * cache.activations[k].transpose();
    grads.biases[k] += delta.rowwise().sum();
    if (k == 0) break;
    Matrix back = p.weights[k].transpose() * delta;
    // d elu(z) / dz is 1 on the positive branch and exp(z) = elu(z) + 1 otherwise
    const Matrix& a = cache.activations[k];
    delta = back.array() * (a.array() >= 0.0).select(Matrix::Ones(a.rows(), a.cols()), a.array() + 1.0).array();
  }
}

inline double forward(const DenseClassifier& net, std::span<const double> input) {
  const Eigen::Map<const Vector> column(input.data(), static_cast<Eigen::Index>(input.size()));
  return forward_batch(net, column)(0);
}

/// Gradient of upstream * logit for one input.
inline ParamSet backward(const DenseClassifier& net, std::span<const double> input, double upstream) {
  const Eigen::Map<const Vector> column(input.data(), static_cast<Eigen::Index>(input.size()));
  ForwardCache cache;
  forward_batch(net, column, &cache);
  ParamSet grads = ParamSet::zeros(net.layer_sizes());
  backward_batch(net, cache, RowVector::Constant(1, upstream), grads);
  return grads;
}

}  // namespace amnre
