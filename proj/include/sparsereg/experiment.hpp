#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "sparsereg/config.hpp"
#include "sparsereg/data.hpp"
#include "sparsereg/trainer.hpp"

namespace sparsereg {

inline constexpr const char* kRunCsvHeader =
    "epoch,lambda,lr,train_objective,train_accuracy,test_accuracy,sparse_rate";
inline constexpr const char* kSummaryCsvHeader =
    "name,runs,test_accuracy_mean,test_accuracy_std,sparse_rate_mean,sparse_rate_std";

// Clean train/test data for a config: loaded or generated, split, and with the
// imbalance profile applied to the training side only.
TrainTestSplit prepare_data(const ExperimentConfig& cfg);

// Transition matrix for the noise block over `classes` classes.
TransitionMatrix noise_transition(const NoiseBlock& noise, std::size_t classes);

struct RunResult {
  std::uint64_t seed = 0;
  double observed_flip_rate = 0.0;
  RunRecord record;
};

// One run: labels corrupted with `seed`, model initialised and shuffled with
// `seed`. The test split stays clean.
RunResult run_once(const ExperimentConfig& cfg, const TrainTestSplit& data, std::uint64_t seed);

struct Summary {
  std::size_t runs = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;  // sample std (n - 1); 0 for a single run
  double sparse_mean = 0.0;
  double sparse_std = 0.0;
};

Summary summarize(const std::vector<RunResult>& runs);

void write_run_csv(const RunRecord& record, std::ostream& out);
void write_summary_csv(const std::string& name, const Summary& summary, std::ostream& out);

struct ExperimentResult {
  std::vector<RunResult> runs;
  Summary summary;
  std::filesystem::path output_dir;
};

// Runs seeds cfg.seed .. cfg.seed + repeats - 1 (up to `jobs` at a time) and
// writes run_<seed>.csv, summary.csv and config.snapshot to cfg.output_dir.
// Files are only written once every run has finished.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1);

}  // namespace sparsereg
