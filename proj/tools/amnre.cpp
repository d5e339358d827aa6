// Command-line front end: dataset simulation, training, evaluation,
// MCMC ground truth and diagnostics. Every output is a binary file or CSV.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "amnre/amnre.hpp"

namespace fs = std::filesystem;
using namespace amnre;

namespace {

/// Bad command-line input discovered after parsing; exits with status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<char> buf(1 << 16);
  std::uint64_t h = 0xcbf29ce484222325ull;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = io::fnv1a(std::span<const char>(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::vector<double> read_obs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open observation file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream values(text);
  std::vector<double> x;
  double v;
  while (values >> v) x.push_back(v);
  if (!values.eof()) throw std::runtime_error("observation file '" + path + "' holds non-numeric text");
  return x;
}

/// Observation chosen either by index into a dataset or from a text file.
struct ObservationSource {
  std::string data;
  long index = -1;
  std::string file;

  std::vector<double> load(std::size_t obs_dim, std::vector<double>* theta = nullptr) const {
    std::vector<double> x;
    if (!file.empty()) {
      x = read_obs_file(file);
    } else if (!data.empty() && index >= 0) {
      const Dataset ds = load_dataset(data);
      if (static_cast<std::size_t>(index) >= ds.size()) throw UsageError("--obs-index out of range");
      x.assign(ds.x(index).begin(), ds.x(index).end());
      if (theta) theta->assign(ds.theta(index).begin(), ds.theta(index).end());
    } else {
      throw UsageError("give --obs-file, or --data with --obs-index");
    }
    if (x.size() != obs_dim)
      throw std::runtime_error("observation has " + std::to_string(x.size()) + " values, expected " +
                               std::to_string(obs_dim));
    return x;
  }
};

std::vector<SubsetMask> parse_masks(const std::string& text, std::size_t dim) {
  if (text == "all1d2d") return masks_1d_2d(dim);
  if (text == "all1d") return enumerate_masks(dim, 1);
  if (text == "all2d") return enumerate_masks(dim, 2);
  std::vector<SubsetMask> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::optional<SubsetMask> m;
    try {
      m = SubsetMask::parse(trim(item));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (m->dim() != dim) throw UsageError("mask '" + item + "' does not have " + std::to_string(dim) + " bits");
    out.push_back(*m);
  }
  if (out.empty()) throw UsageError("no masks given");
  return out;
}

std::vector<RatioEstimator> load_models(const std::vector<std::string>& paths) {
  std::vector<RatioEstimator> models;
  for (const auto& p : paths) {
    models.push_back(load_model(p));
    if (models.back().param_dim() != models.front().param_dim() ||
        models.back().obs_dim() != models.front().obs_dim() ||
        models.back().simulator() != models.front().simulator())
      throw std::runtime_error("models '" + paths.front() + "' and '" + p + "' are not interchangeable");
  }
  return models;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string simulator = "slcp";
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  std::string out, csv, label;
};

int run_simulate(const SimulateArgs& a) {
  const auto sim = make_simulator(a.simulator);
  const Dataset ds = generate(*sim, a.count, a.seed, a.label);
  save_dataset(a.out, ds);
  if (!a.csv.empty()) {
    auto csv = open_out(a.csv);
    export_dataset_csv(csv, ds);
  }
  std::cout << "wrote " << a.out << ": " << ds.size() << " records, " << fs::file_size(a.out) << " bytes, checksum "
            << hex(file_checksum(a.out)) << '\n';
  return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config, train, val, out, report, checkpoint;
  bool resume = false;
  bool quiet = false;
  KeyValues overrides;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg.apply(load_key_values(a.config));
  cfg.apply(a.overrides);
  cfg.validate();

  const Dataset train = load_dataset(a.train);
  const Dataset val = load_dataset(a.val);
  const auto sim = make_simulator(train.header.simulator);
  train.expect_dims(sim->param_dim(), sim->obs_dim());

  FitOptions opts;
  opts.checkpoint_path = a.checkpoint;
  if (a.resume) {
    if (a.checkpoint.empty() || !fs::exists(a.checkpoint)) throw UsageError("--resume needs an existing --checkpoint");
    opts.resume_from = load_training_state(a.checkpoint);
  }
  if (!a.quiet)
    opts.on_epoch = [](const EpochRecord& e) {
      std::cout << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss << " lr " << e.lr
                << std::endl;
    };

  Rng init_rng(cfg.seed, 0);
  const auto [x_mean, x_std] = observation_moments(train);
  RatioEstimator est = RatioEstimator::create(*sim, cfg.hidden_layers, cfg.width, x_mean, x_std, init_rng);
  const auto start = std::chrono::steady_clock::now();
  const TrainReport report = fit(est, train, val, cfg, opts);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  save_model(a.out, est);
  const std::string report_path = a.report.empty() ? a.out + ".csv" : a.report;
  auto csv = open_out(report_path);
  report.write_csv(csv);
  const double best = report.best_epoch == 0 ? report.initial_val_loss : report.epochs[report.best_epoch - 1].val_loss;
  std::cout << "stopped: " << report.stop_reason << " after " << report.epochs.size() << " epochs (" << seconds
            << " s); initial val loss " << report.initial_val_loss << ", best val loss " << best << " at epoch "
            << report.best_epoch << "\nwrote " << a.out << " and " << report_path << '\n';
  return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> models;
  ObservationSource obs;
  std::string masks = "all1d2d";
  std::size_t bins = 100;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const auto models = load_models(a.models);
  const auto sim = make_simulator(models.front().simulator());
  const auto x = a.obs.load(models.front().obs_dim());
  const auto masks = parse_masks(a.masks, models.front().param_dim());
  fs::create_directories(a.out);

  const auto start = std::chrono::steady_clock::now();
  std::vector<MarginalHistogram> hists;
  for (const auto& m : masks) hists.push_back(ensemble_histogram(models, sim->prior(), x, m, a.bins));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::vector<double> levels{0.683, 0.955, 0.997};
  auto hpd = open_out(fs::path(a.out) / "hpd.csv");
  hpd << "mask,credibility,threshold,mass\n";
  hpd.precision(17);
  for (const auto& h : hists) {
    auto csv = open_out(fs::path(a.out) / ("hist_" + h.mask.to_string() + ".csv"));
    h.write_csv(csv);
    const auto t = hpd_levels(h, levels);
    for (std::size_t i = 0; i < levels.size(); ++i)
      hpd << h.mask.to_string() << ',' << levels[i] << ',' << t[i] << ',' << mass_above(h, t[i]) << '\n';
  }
  std::cout << "evaluated " << hists.size() << " marginals with " << models.size() << " model(s) in " << seconds
            << " s; wrote " << a.out << '\n';
  return 0;
}

// --- ground-truth ----------------------------------------------------------

struct GroundTruthArgs {
  ObservationSource obs;
  std::string simulator;
  std::string mcmc_config;
  std::string out, csv;
  std::optional<std::uint64_t> seed;
  bool no_symmetrize = false;
};

int run_ground_truth(const GroundTruthArgs& a) {
  std::string sim_name = a.simulator;
  if (sim_name.empty() && !a.obs.data.empty()) sim_name = DatasetReader(a.obs.data).header().simulator;
  if (sim_name.empty()) sim_name = "slcp";
  const auto sim = make_simulator(sim_name);
  McmcConfig cfg;
  if (!a.mcmc_config.empty()) cfg.apply(load_key_values(a.mcmc_config));
  if (a.seed) cfg.seed = *a.seed;
  const auto x = a.obs.load(sim->obs_dim());

  SampleSet samples = mh_sample(*sim, x, cfg);
  if (sim->name() == "slcp" && !a.no_symmetrize) {
    Rng flip_rng(cfg.seed, std::uint64_t{1} << 40);
    samples = symmetrize(std::move(samples), slcp_sign_symmetric_coords, flip_rng);
  }
  for (const auto& w : samples.warnings) std::cerr << "warning: " << w << '\n';
  save_samples(a.out, samples);
  if (!a.csv.empty()) {
    auto csv = open_out(a.csv);
    export_samples_csv(csv, samples);
  }
  double mean_acc = 0.0;
  for (double r : samples.acceptance_rates) mean_acc += r / static_cast<double>(samples.acceptance_rates.size());
  std::cout << "wrote " << a.out << ": " << samples.size() << " samples, mean acceptance " << mean_acc << ", checksum "
            << hex(file_checksum(a.out)) << '\n';
  return 0;
}

// --- diagnose --------------------------------------------------------------

struct DiagnoseArgs {
  std::vector<std::string> models;
  std::vector<std::string> truths;
  std::string test, out;
  std::string masks = "all1d2d";
  std::size_t bins = 100;
  std::size_t calibration_count = 2048;
  std::uint64_t seed = 0;
};

int run_diagnose(const DiagnoseArgs& a) {
  const auto models = load_models(a.models);
  const auto sim = make_simulator(models.front().simulator());
  const auto& prior = sim->prior();
  fs::create_directories(a.out);

  if (!a.truths.empty()) {
    const auto masks = parse_masks(a.masks, models.front().param_dim());
    auto kl = open_out(fs::path(a.out) / "kl.csv");
    kl << "observation,mask,kl_forward,kl_reverse\n";
    kl.precision(17);
    std::vector<std::vector<double>> fwd(masks.size()), rev(masks.size());
    for (std::size_t t = 0; t < a.truths.size(); ++t) {
      const SampleSet truth = load_samples(a.truths[t]);
      for (std::size_t m = 0; m < masks.size(); ++m) {
        const auto gt = sample_histogram(truth, prior, masks[m], a.bins);
        const auto sur = ensemble_histogram(models, prior, truth.observation, masks[m], a.bins);
        fwd[m].push_back(kl_divergence(gt, sur));
        rev[m].push_back(kl_divergence(sur, gt));
        kl << t << ',' << masks[m].to_string() << ',' << fwd[m].back() << ',' << rev[m].back() << '\n';
      }
    }
    std::vector<KlRow> summary;
    for (std::size_t m = 0; m < masks.size(); ++m) {
      double f = 0, r = 0;
      for (std::size_t t = 0; t < fwd[m].size(); ++t) {
        f += fwd[m][t] / static_cast<double>(fwd[m].size());
        r += rev[m][t] / static_cast<double>(rev[m].size());
      }
      summary.push_back({masks[m], f, r});
      std::cout << "KL " << masks[m].to_string() << " forward " << f << " reverse " << r << '\n';
    }
    auto csv = open_out(fs::path(a.out) / "kl_summary.csv");
    write_kl_csv(csv, summary);
  }

  if (!a.test.empty()) {
    const Dataset test = load_dataset(a.test);
    test.expect_dims(models.front().param_dim(), models.front().obs_dim());
    const auto curves =
        calibration_cdf(models, prior, test, std::min<std::size_t>(a.calibration_count, test.size()), a.bins, a.seed);
    auto csv = open_out(fs::path(a.out) / "calibration.csv");
    write_calibration_csv(csv, curves);
    for (const auto& c : curves) std::cout << "calibration theta" << c.coordinate + 1 << " KS " << c.ks << '\n';
  }
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

void add_obs_options(CLI::App* cmd, ObservationSource& obs) {
  cmd->add_option("--data,--test", obs.data, "Dataset holding the observation");
  cmd->add_option("--obs-index", obs.index, "Record index in --data");
  cmd->add_option("--obs-file", obs.file, "Text file with the observation values");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arbitrary-marginal neural ratio estimation toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Generate a dataset of (theta, x) pairs");
  simulate->add_option("--simulator", sim_args.simulator, "slcp or gauss1d")->capture_default_str();
  simulate->add_option("--count", sim_args.count, "Number of pairs")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_args.seed, "Dataset seed")->capture_default_str();
  simulate->add_option("--out", sim_args.out, "Output dataset file")->required();
  simulate->add_option("--label", sim_args.label, "Free-form label stored in the header (max 16 chars)");
  simulate->add_option("--csv", sim_args.csv, "Also export as CSV");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a ratio estimator");
  train->add_option("--config", train_args.config, "key=value configuration file");
  train->add_option("--train", train_args.train, "Training dataset")->required();
  train->add_option("--val", train_args.val, "Validation dataset")->required();
  train->add_option("--out", train_args.out, "Output model file")->required();
  train->add_option("--report", train_args.report, "Loss curve CSV (default <out>.csv)");
  train->add_option("--checkpoint", train_args.checkpoint, "Training state file written after every epoch");
  train->add_flag("--resume", train_args.resume, "Continue from --checkpoint");
  train->add_flag("--quiet", train_args.quiet, "No per-epoch output");
  for (const char* key : {"seed", "batch_size", "batches_per_epoch", "weight_decay", "lr_init", "lr_final",
                          "plateau_patience", "plateau_factor", "max_epochs", "val_seed", "hidden_layers", "width"}) {
    std::string flag = std::string("--") + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    train->add_option_function<std::string>(
        flag, [&train_args, key](const std::string& v) { train_args.overrides[key] = v; },
        std::string("Override config key ") + key);
  }

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Histogram surrogate marginal posteriors for one observation");
  eval->add_option("--model", eval_args.models, "Model file; repeat to average several")->required();
  add_obs_options(eval, eval_args.obs);
  eval->add_option("--masks", eval_args.masks, "all1d2d, all1d, all2d or comma-separated bit strings")
      ->capture_default_str();
  eval->add_option("--bins", eval_args.bins, "Bins per axis")->capture_default_str()->check(CLI::Range(2, 100000));
  eval->add_option("--out", eval_args.out, "Output directory")->required();

  GroundTruthArgs gt_args;
  auto* gt = app.add_subcommand("ground-truth", "MCMC reference posterior for one observation");
  add_obs_options(gt, gt_args.obs);
  gt->add_option("--simulator", gt_args.simulator, "Simulator (default: from --data, else slcp)");
  gt->add_option("--mcmc-config", gt_args.mcmc_config, "key=value MCMC configuration file");
  gt->add_option("--seed", gt_args.seed, "Override the MCMC seed");
  gt->add_option("--out", gt_args.out, "Output sample file")->required();
  gt->add_option("--csv", gt_args.csv, "Also export samples as CSV");
  gt->add_flag("--no-symmetrize", gt_args.no_symmetrize, "Keep raw chain signs for theta3/theta4");

  DiagnoseArgs diag_args;
  auto* diagnose = app.add_subcommand("diagnose", "KL against ground truth and calibration of 1d marginals");
  diagnose->add_option("--model", diag_args.models, "Model file; repeat to average several")->required();
  diagnose->add_option("--truth", diag_args.truths, "Ground-truth sample file; repeatable");
  diagnose->add_option("--test", diag_args.test, "Test dataset for calibration");
  diagnose->add_option("--out", diag_args.out, "Output directory")->required();
  diagnose->add_option("--masks", diag_args.masks, "Masks for the KL table")->capture_default_str();
  diagnose->add_option("--bins", diag_args.bins, "Bins per axis")->capture_default_str()->check(CLI::Range(2, 100000));
  diagnose->add_option("--calibration-count", diag_args.calibration_count, "Test pairs used for calibration")
      ->capture_default_str();
  diagnose->add_option("--seed", diag_args.seed, "Seed of the randomized percentiles")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate) return run_simulate(sim_args);
    if (*train) return run_train(train_args);
    if (*eval) return run_eval(eval_args);
    if (*gt) return run_ground_truth(gt_args);
    if (*diagnose) return run_diagnose(diag_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
