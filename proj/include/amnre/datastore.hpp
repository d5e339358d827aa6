#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <span>
#include <string>
#include <vector>

#include "amnre/binary_io.hpp"
#include "amnre/parallel.hpp"
#include "amnre/simulator.hpp"

namespace amnre {

/// Header of a dataset file.
///
/// Layout: "AMNREDS1", u64 D, u64 dim(x), u64 count, u64 seed, simulator tag
/// (16 bytes), label (16 bytes, e.g. "desk-scale"); then `count` records of
/// D + dim(x) little-endian f64 values (theta first, then x).
struct DatasetHeader {
  std::uint64_t param_dim = 0;
  std::uint64_t obs_dim = 0;
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  std::string simulator;
  std::string label;

  static constexpr std::size_t byte_size = 8 + 4 * 8 + 16 + 16;
  std::size_t record_size() const { return param_dim + obs_dim; }

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

/// Desk-scale split sizes, scaled down from 2^20 / 2^17 / 2^17.
inline constexpr std::uint64_t desk_train_count = 1u << 17;
inline constexpr std::uint64_t desk_val_count = 1u << 14;
inline constexpr std::uint64_t desk_test_count = 1u << 14;

/// In-memory (theta, x) pairs.
struct Dataset {
  DatasetHeader header;
  std::vector<double> records;

  std::size_t size() const { return header.count; }
  std::span<const double> theta(std::size_t i) const {
    return {records.data() + i * header.record_size(), header.param_dim};
  }
  std::span<const double> x(std::size_t i) const {
    return {records.data() + i * header.record_size() + header.param_dim, header.obs_dim};
  }

  void expect_dims(std::size_t param_dim, std::size_t obs_dim) const {
    if (header.param_dim != param_dim || header.obs_dim != obs_dim)
      throw FormatError("dataset has D=" + std::to_string(header.param_dim) + ", dim(x)=" +
                        std::to_string(header.obs_dim) + "; expected D=" + std::to_string(param_dim) +
                        ", dim(x)=" + std::to_string(obs_dim));
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Record i is drawn from its own stream (seed, i), so any record can be
/// regenerated alone and the output does not depend on the worker count.
inline void generate_record(const Simulator& sim, std::uint64_t seed, std::uint64_t index, std::span<double> record) {
  Rng rng(seed, index);
  const auto theta = record.subspan(0, sim.param_dim());
  sim.sample_prior(rng, theta);
  sim.simulate(theta, rng, record.subspan(sim.param_dim(), sim.obs_dim()));
}

inline Dataset generate(const Simulator& sim, std::uint64_t count, std::uint64_t seed, std::string label = "") {
  if (count == 0) throw std::invalid_argument("generate: count must be at least 1");
  Dataset ds;
  ds.header = {sim.param_dim(), sim.obs_dim(), count, seed, sim.name(), std::move(label)};
  const std::size_t width = ds.header.record_size();
  ds.records.resize(count * width);
  parallel_for(count, [&](std::size_t i) {
    generate_record(sim, seed, i, std::span<double>(ds.records).subspan(i * width, width));
  });
  return ds;
}

inline void write_dataset_header(std::ostream& out, const DatasetHeader& h) {
  out.write("AMNREDS1", 8);
  for (auto v : {h.param_dim, h.obs_dim, h.count, h.seed}) io::write_pod(out, v);
  io::write_fixed(out, h.simulator, 16);
  io::write_fixed(out, h.label, 16);
}

inline DatasetHeader read_dataset_header(std::istream& in) {
  io::expect_magic(in, "AMNREDS1");
  DatasetHeader h;
  for (auto* v : {&h.param_dim, &h.obs_dim, &h.count, &h.seed}) *v = io::read_pod<std::uint64_t>(in);
  h.simulator = io::read_fixed(in, 16);
  h.label = io::read_fixed(in, 16);
  if (h.param_dim == 0 || h.obs_dim == 0 || h.param_dim > 62 || h.obs_dim > (1u << 20))
    throw FormatError("dataset header: bad dimensions");
  return h;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset_header(out, ds.header);
  io::write_doubles(out, ds.records);
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

/// Random-access reader that streams records from disk.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open dataset '" + path + "'");
    header_ = read_dataset_header(in_);
    const auto expected = DatasetHeader::byte_size + header_.count * header_.record_size() * sizeof(double);
    const auto actual = std::filesystem::file_size(path);
    if (actual != expected)
      throw FormatError("dataset '" + path + "' holds " + std::to_string(actual) + " bytes, header implies " +
                        std::to_string(expected) + " (truncated or corrupt)");
  }

  const DatasetHeader& header() const { return header_; }

  void read(std::size_t index, std::span<double> record) {
    if (index >= header_.count) throw std::out_of_range("dataset record index out of range");
    if (record.size() != header_.record_size()) throw std::invalid_argument("record buffer has wrong length");
    in_.seekg(static_cast<std::streamoff>(DatasetHeader::byte_size + index * header_.record_size() * sizeof(double)));
    io::read_doubles(in_, record);
  }

  /// Visits records in the given order (identity when empty).
  void for_each(std::span<const std::size_t> order,
                const std::function<void(std::size_t, std::span<const double>, std::span<const double>)>& fn) {
    std::vector<double> rec(header_.record_size());
    const std::size_t n = order.empty() ? header_.count : order.size();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = order.empty() ? k : order[k];
      read(i, rec);
      fn(i, std::span<const double>(rec).first(header_.param_dim),
         std::span<const double>(rec).subspan(header_.param_dim));
    }
  }

 private:
  std::ifstream in_;
  DatasetHeader header_;
};

inline Dataset load_dataset(const std::string& path) {
  DatasetReader reader(path);
  Dataset ds;
  ds.header = reader.header();
  ds.records.resize(ds.header.count * ds.header.record_size());
  std::ifstream in(path, std::ios::binary);
  in.seekg(DatasetHeader::byte_size);
  io::read_doubles(in, ds.records);
  for (double v : ds.records)
    if (!std::isfinite(v)) throw FormatError("dataset '" + path + "' contains non-finite values");
  return ds;
}

inline void export_dataset_csv(std::ostream& out, const Dataset& ds) {
  for (std::size_t i = 0; i < ds.header.param_dim; ++i) out << "theta" << i + 1 << ',';
  for (std::size_t j = 0; j < ds.header.obs_dim; ++j) out << 'x' << j + 1 << (j + 1 < ds.header.obs_dim ? ',' : '\n');
  out << std::setprecision(17);
  const std::size_t w = ds.header.record_size();
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t k = 0; k < w; ++k) out << ds.records[i * w + k] << (k + 1 < w ? ',' : '\n');
}

/// Per-feature mean and standard deviation of the observations.
inline std::pair<std::vector<double>, std::vector<double>> observation_moments(const Dataset& ds) {
  const std::size_t m = ds.header.obs_dim;
  std::vector<double> mean(m, 0.0), std(m, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) mean[j] += ds.x(i)[j];
  for (auto& v : mean) v /= static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < m; ++j) std[j] += (ds.x(i)[j] - mean[j]) * (ds.x(i)[j] - mean[j]);
  for (auto& v : std) {
    v = std::sqrt(v / static_cast<double>(std::max<std::size_t>(1, ds.size() - 1)));
    if (!(v > 0.0)) v = 1.0;
  }
  return {mean, std};
}

}  // namespace amnre
