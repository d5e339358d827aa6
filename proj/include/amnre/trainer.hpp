#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amnre/adamw.hpp"
#include "amnre/checkpoint.hpp"
#include "amnre/config.hpp"
#include "amnre/datastore.hpp"
#include "amnre/estimator.hpp"
#include "amnre/losses.hpp"
#include "amnre/masking.hpp"

namespace amnre {

struct TrainConfig {
  std::size_t batch_size = 1024;
  std::size_t batches_per_epoch = 256;
  double weight_decay = 1e-4;
  double lr_init = 1e-3;
  double lr_final = 1e-6;
  std::size_t plateau_patience = 7;
  double plateau_factor = 2.0;
  std::size_t max_epochs = 1024;
  std::uint64_t seed = 0;
  std::uint64_t val_seed = 0x5eed;
  // architecture of a freshly created estimator
  int hidden_layers = 3;
  int width = 128;

  void validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (batches_per_epoch < 1) throw ConfigError("batches_per_epoch must be at least 1");
    if (!(lr_init > 0.0) || !(lr_final > 0.0) || !(lr_final < lr_init))
      throw ConfigError("learning rates must satisfy 0 < lr_final < lr_init");
    if (!(plateau_factor > 1.0)) throw ConfigError("plateau_factor must exceed 1");
    if (plateau_patience < 1) throw ConfigError("plateau_patience must be at least 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (hidden_layers < 0 || width < 1) throw ConfigError("bad architecture");
  }

  /// Overrides fields from key=value pairs; unknown keys are rejected.
  void apply(const KeyValues& kv) {
    for (const auto& [key, value] : kv) {
      if (key == "batch_size") batch_size = parse_value<std::size_t>(key, value);
      else if (key == "batches_per_epoch") batches_per_epoch = parse_value<std::size_t>(key, value);
      else if (key == "weight_decay") weight_decay = parse_value<double>(key, value);
      else if (key == "lr_init") lr_init = parse_value<double>(key, value);
      else if (key == "lr_final") lr_final = parse_value<double>(key, value);
      else if (key == "plateau_patience") plateau_patience = parse_value<std::size_t>(key, value);
      else if (key == "plateau_factor") plateau_factor = parse_value<double>(key, value);
      else if (key == "max_epochs") max_epochs = parse_value<std::size_t>(key, value);
      else if (key == "seed") seed = parse_value<std::uint64_t>(key, value);
      else if (key == "val_seed") val_seed = parse_value<std::uint64_t>(key, value);
      else if (key == "hidden_layers") hidden_layers = parse_value<int>(key, value);
      else if (key == "width") width = parse_value<int>(key, value);
      else throw ConfigError("unknown config key '" + key + "'");
    }
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  double initial_val_loss = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch improved on the initial network
  std::string stop_reason;

  void write_csv(std::ostream& out) const {
    out << "epoch,train_loss,val_loss,lr\n";
    out.precision(17);
    for (const auto& e : epochs) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << '\n';
  }

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// theta'_i = theta_{i+1}, theta'_n = theta_1.
template <typename T>
std::vector<T> circular_shift_negatives(std::span<const T> batch) {
  if (batch.size() < 2) throw std::invalid_argument("circular shift needs at least two elements");
  std::vector<T> out(batch.begin() + 1, batch.end());
  out.push_back(batch.front());
  return out;
}

/// Halves (divides by `factor`) the rate whenever the best loss has not strictly
/// improved for `patience` consecutive epochs; the counter restarts after each
/// improvement and after each reduction.
struct PlateauScheduler {
  std::size_t patience = 7;
  double factor = 2.0;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;

  double update(double val_loss, double lr) {
    if (val_loss < best) {
      best = val_loss;
      stale_epochs = 0;
      return lr;
    }
    if (++stale_epochs >= patience) {
      stale_epochs = 0;
      return lr / factor;
    }
    return lr;
  }
};

/// Learning rate after the scheduler has consumed the whole validation history,
/// starting from `lr`.
inline double reduce_on_plateau(std::span<const double> history, double lr, std::size_t patience, double factor) {
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  PlateauScheduler s{patience, factor};
  for (double v : history) lr = s.update(v, lr);
  return lr;
}

/// Mean contrastive loss over a batch; negatives pair each x_i with theta of
/// the next element. When `grads` is given it receives the mean gradient.
inline double contrastive_batch(const RatioEstimator& est, const Dataset& ds, std::span<const std::size_t> indices,
                                std::span<const SubsetMask> masks, ParamSet* grads = nullptr) {
  const std::size_t n = indices.size();
  if (n < 2 || masks.size() != n) throw std::invalid_argument("contrastive batch needs >= 2 elements and one mask each");
  const auto shifted = circular_shift_negatives(indices);
  const std::size_t width = est.input_size();
  Matrix inputs(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    est.encode(ds.theta(indices[i]), ds.x(indices[i]), masks[i], {inputs.col(i).data(), width});
    est.encode(ds.theta(shifted[i]), ds.x(indices[i]), masks[i], {inputs.col(n + i).data(), width});
  }
  ForwardCache cache;
  const RowVector logits = forward_batch(est.net(), inputs, grads ? &cache : nullptr);
  double total = 0.0;
  RowVector upstream(2 * n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = logits(i), neg = logits(n + i);
    total += softplus_losses(pos).positive + softplus_losses(neg).negative;
    upstream(i) = -sigmoid(-pos) * scale;
    upstream(n + i) = sigmoid(neg) * scale;
  }
  if (grads) {
    *grads = ParamSet::zeros(est.net().layer_sizes());
    backward_batch(est.net(), cache, upstream, *grads);
  }
  return total * scale;
}

/// One epoch of optimizer steps; returns the mean batch loss.
inline double train_epoch(RatioEstimator& est, OptimState& optim, const Dataset& train, const TrainConfig& cfg,
                          Rng& rng, const MaskSampler& sampler) {
  if (train.size() < cfg.batch_size) throw TrainingError("training set is smaller than one batch");
  std::vector<std::size_t> order(train.size());
  std::size_t cursor = order.size();
  std::vector<SubsetMask> masks;
  ParamSet grads;
  double total = 0.0;
  for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
    if (cursor + cfg.batch_size > order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::span<const std::size_t> batch(order.data() + cursor, cfg.batch_size);
    cursor += cfg.batch_size;
    masks.clear();
    for (std::size_t i = 0; i < batch.size(); ++i) masks.push_back(sampler(rng));
    const double loss = contrastive_batch(est, train, batch, masks, &grads);
    if (!std::isfinite(loss))
      throw TrainingError("non-finite loss at batch " + std::to_string(b) + " (step " + std::to_string(optim.step) +
                          ", lr " + std::to_string(optim.config.learning_rate) + ")");
    adamw_step(est.net(), grads, optim);
    total += loss;
  }
  return total / static_cast<double>(cfg.batches_per_epoch);
}

/// Mean contrastive loss over the whole validation set with masks drawn from a
/// stream seeded by `val_seed`, so values are comparable across epochs.
inline double validation_loss(const RatioEstimator& est, const Dataset& val, const TrainConfig& cfg,
                              const MaskSampler& sampler) {
  if (val.size() < 2) throw TrainingError("validation set needs at least two pairs");
  Rng rng(cfg.val_seed);
  std::vector<std::size_t> idx;
  std::vector<SubsetMask> masks;
  double total = 0.0;
  std::size_t start = 0;
  while (start < val.size()) {
    std::size_t end = std::min(val.size(), start + cfg.batch_size);
    if (val.size() - end == 1) ++end;  // never leave a single-element chunk
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    masks.clear();
    for (std::size_t i = start; i < end; ++i) masks.push_back(sampler(rng));
    total += contrastive_batch(est, val, idx, masks) * static_cast<double>(end - start);
    start = end;
  }
  return total / static_cast<double>(val.size());
}

/// Complete mutable state of a training run, serializable for exact resumption.
struct TrainingState {
  RatioEstimator est;
  OptimState optim;
  Rng rng;
  PlateauScheduler scheduler;
  DenseClassifier best_net;
  double best_val = 0.0;
  TrainReport report;
};

inline void write_training_state(std::ostream& out, const TrainingState& s) {
  out.write("AMNRECK1", 8);
  write_model(out, s.est);
  write_optim_state(out, s.optim);
  io::write_string(out, s.rng.state());
  io::write_pod<std::uint64_t>(out, s.scheduler.patience);
  io::write_pod(out, s.scheduler.factor);
  io::write_pod(out, s.scheduler.best);
  io::write_pod<std::uint64_t>(out, s.scheduler.stale_epochs);
  write_network(out, s.best_net);
  io::write_pod(out, s.best_val);
  io::write_pod(out, s.report.initial_val_loss);
  io::write_pod<std::uint64_t>(out, s.report.best_epoch);
  io::write_pod<std::uint64_t>(out, s.report.epochs.size());
  for (const auto& e : s.report.epochs) {
    io::write_pod<std::uint64_t>(out, e.epoch);
    for (double v : {e.train_loss, e.val_loss, e.lr}) io::write_pod(out, v);
  }
}

inline TrainingState read_training_state(std::istream& in) {
  io::expect_magic(in, "AMNRECK1");
  TrainingState s;
  s.est = read_model(in);
  s.optim = read_optim_state(in, s.est.net());
  s.rng.set_state(io::read_string(in));
  s.scheduler.patience = io::read_pod<std::uint64_t>(in);
  s.scheduler.factor = io::read_pod<double>(in);
  s.scheduler.best = io::read_pod<double>(in);
  s.scheduler.stale_epochs = io::read_pod<std::uint64_t>(in);
  s.best_net = read_network(in);
  s.best_val = io::read_pod<double>(in);
  s.report.initial_val_loss = io::read_pod<double>(in);
  s.report.best_epoch = io::read_pod<std::uint64_t>(in);
  const auto n = io::read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    EpochRecord e;
    e.epoch = io::read_pod<std::uint64_t>(in);
    e.train_loss = io::read_pod<double>(in);
    e.val_loss = io::read_pod<double>(in);
    e.lr = io::read_pod<double>(in);
    s.report.epochs.push_back(e);
  }
  return s;
}

struct FitOptions {
  /// Written after every epoch when non-empty.
  std::string checkpoint_path;
  /// Continue from this training state instead of starting fresh.
  std::optional<TrainingState> resume_from;
  std::function<void(const EpochRecord&)> on_epoch;
  MaskSampler mask_sampler;  // uniform over nonzero masks when empty
};

/// Trains until the learning rate reaches `lr_final` (or `max_epochs`), then
/// restores the parameters with the lowest validation loss.
inline TrainReport fit(RatioEstimator& est, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                       FitOptions opts = {}) {
  cfg.validate();
  train.expect_dims(est.param_dim(), est.obs_dim());
  val.expect_dims(est.param_dim(), est.obs_dim());
  if (train.header.seed == val.header.seed && train.header.simulator == val.header.simulator)
    throw TrainingError("training and validation sets share a seed, so they are not disjoint");
  const MaskSampler sampler = opts.mask_sampler ? opts.mask_sampler : uniform_mask_sampler(est.param_dim());

  TrainingState s;
  if (opts.resume_from) {
    s = std::move(*opts.resume_from);
  } else {
    s.est = est;
    s.optim = OptimState::for_network(est.net(), {cfg.lr_init, cfg.weight_decay});
    s.rng = Rng(cfg.seed, 1);
    s.scheduler = PlateauScheduler{cfg.plateau_patience, cfg.plateau_factor};
    s.best_net = est.net();
    s.best_val = s.report.initial_val_loss = validation_loss(est, val, cfg, sampler);
  }

  auto finish = [&](std::string reason) {
    s.report.stop_reason = std::move(reason);
    s.est.net() = s.best_net;
    est = s.est;
    return s.report;
  };

  for (;;) {
    if (s.optim.config.learning_rate <= cfg.lr_final) return finish("lr_final reached");
    if (s.report.epochs.size() >= cfg.max_epochs) return finish("max_epochs reached");

    EpochRecord rec;
    rec.epoch = s.report.epochs.size() + 1;
    rec.lr = s.optim.config.learning_rate;
    rec.train_loss = train_epoch(s.est, s.optim, train, cfg, s.rng, sampler);
    rec.val_loss = validation_loss(s.est, val, cfg, sampler);
    if (!std::isfinite(rec.val_loss)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(rec.epoch));
    if (rec.val_loss < s.best_val) {
      s.best_val = rec.val_loss;
      s.best_net = s.est.net();
      s.report.best_epoch = rec.epoch;
    }
    s.optim.config.learning_rate = s.scheduler.update(rec.val_loss, s.optim.config.learning_rate);
    s.report.epochs.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
    if (!opts.checkpoint_path.empty()) {
      const std::string tmp = opts.checkpoint_path + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary);
        write_training_state(out, s);
        if (!out) throw std::runtime_error("cannot write checkpoint '" + tmp + "'");
      }
      std::filesystem::rename(tmp, opts.checkpoint_path);
    }
  }
}

inline TrainingState load_training_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return read_training_state(in);
}

}  // namespace amnre
