#include "sparsereg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "sparsereg/error.hpp"

namespace sparsereg {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Mean and sample standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

}  // namespace

TrainTestSplit prepare_data(const ExperimentConfig& cfg) {
  const DatasetBlock& d = cfg.dataset;
  TrainTestSplit data;
  switch (d.source) {
    case DataSource::kBlobs:
      data = split(gaussian_blobs(d.classes, d.per_class, d.dim, d.separation, d.seed),
                   d.test_fraction, d.seed);
      break;
    case DataSource::kIdx:
      if (d.test_images.empty()) {
        data = split(load_idx(d.images, d.labels, d.classes), d.test_fraction, d.seed);
      } else {
        data.train = load_idx(d.images, d.labels, d.classes);
        data.test = load_idx(d.test_images, d.test_labels, d.classes);
      }
      break;
    case DataSource::kCsv:
      if (d.test_path.empty()) {
        data = split(load_csv(d.path, d.classes), d.test_fraction, d.seed);
      } else {
        data.train = load_csv(d.path, d.classes);
        data.test = load_csv(d.test_path, d.classes);
      }
      break;
  }
  if (data.train.classes != d.classes || data.test.classes != d.classes) {
    throw DomainError("dataset has " + std::to_string(data.train.classes) +
                      " classes, config says " + std::to_string(d.classes));
  }
  if (d.imbalance != Imbalance::kNone) {
    const auto available = data.train.class_counts();
    const std::size_t n_max = *std::min_element(available.begin(), available.end());
    const auto counts = d.imbalance == Imbalance::kLongTailed
                            ? long_tailed_counts(n_max, d.imbalance_ratio, d.classes)
                            : step_counts(n_max, d.imbalance_ratio, d.classes, d.minority_fraction);
    data.train = subsample_per_class(data.train, counts, d.seed);
  }
  return data;
}

TransitionMatrix noise_transition(const NoiseBlock& noise, std::size_t classes) {
  switch (noise.type) {
    case NoiseType::kNone: return TransitionMatrix::identity(classes);
    case NoiseType::kSymmetric: return symmetric_transition(classes, noise.eta);
    case NoiseType::kAsymmetric:
      if (noise.preset) return asymmetric_transition(*noise.preset, classes, noise.eta);
      return asymmetric_transition(read_flip_map(noise.map_file), classes, noise.eta);
  }
  throw DomainError("unknown noise type");
}

RunResult run_once(const ExperimentConfig& cfg, const TrainTestSplit& data, std::uint64_t seed) {
  RunResult result;
  result.seed = seed;
  LabeledDataset noisy = data.train;
  const TransitionMatrix t = noise_transition(cfg.noise, data.train.classes);
  noisy.labels = corrupt(data.train.labels, t, seed).labels;
  result.observed_flip_rate =
      empirical_rate(data.train.labels, noisy.labels, noisy.classes).overall;

  MLPConfig mlp;
  mlp.layer_widths.push_back(data.train.dim());
  mlp.layer_widths.insert(mlp.layer_widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  mlp.layer_widths.push_back(data.train.classes);
  mlp.seed = seed;

  OptimizerConfig opt = cfg.optim;
  opt.seed = seed;
  result.record = train(init_mlp(mlp), noisy, data.test, cfg.loss, cfg.sr, opt);
  return result;
}

Summary summarize(const std::vector<RunResult>& runs) {
  std::vector<double> acc, sparse;
  for (const auto& run : runs) {
    if (run.record.epochs.empty()) continue;
    acc.push_back(run.record.epochs.back().test_accuracy);
    sparse.push_back(run.record.epochs.back().sparse_rate);
  }
  Summary s;
  s.runs = acc.size();
  std::tie(s.accuracy_mean, s.accuracy_std) = mean_std(acc);
  std::tie(s.sparse_mean, s.sparse_std) = mean_std(sparse);
  return s;
}

void write_run_csv(const RunRecord& record, std::ostream& out) {
  out << kRunCsvHeader << '\n';
  for (const auto& e : record.epochs) {
    out << e.epoch << ',' << fmt(e.lambda) << ',' << fmt(e.lr) << ',' << fmt(e.train_objective)
        << ',' << fmt(e.train_accuracy) << ',' << fmt(e.test_accuracy) << ','
        << fmt(e.sparse_rate) << '\n';
  }
}

void write_summary_csv(const std::string& name, const Summary& summary, std::ostream& out) {
  out << kSummaryCsvHeader << '\n';
  out << name << ',' << summary.runs << ',' << fmt(summary.accuracy_mean) << ','
      << fmt(summary.accuracy_std) << ',' << fmt(summary.sparse_mean) << ','
      << fmt(summary.sparse_std) << '\n';
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs) {
  cfg.validate();
  const TrainTestSplit data = prepare_data(cfg);

  ExperimentResult result;
  result.output_dir = cfg.output_dir;
  result.runs.resize(cfg.repeats);
  std::vector<std::exception_ptr> errors(cfg.repeats);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.repeats; i = next++) {
      try {
        result.runs[i] = run_once(cfg, data, cfg.seed + i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, cfg.repeats);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.summary = summarize(result.runs);

  std::filesystem::create_directories(result.output_dir);
  for (const auto& run : result.runs) {
    std::ostringstream csv;
    write_run_csv(run.record, csv);
    write_file(result.output_dir / ("run_" + std::to_string(run.seed) + ".csv"), csv.str());
  }
  std::ostringstream summary;
  write_summary_csv(cfg.name, result.summary, summary);
  write_file(result.output_dir / "summary.csv", summary.str());
  write_file(result.output_dir / "config.snapshot", serialize_config(cfg));
  return result;
}

}  // namespace sparsereg
