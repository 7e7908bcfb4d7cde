#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "sparsereg/losses.hpp"
#include "sparsereg/noise.hpp"
#include "sparsereg/trainer.hpp"

namespace sparsereg {

enum class DataSource { kBlobs, kIdx, kCsv };
enum class Imbalance { kNone, kLongTailed, kStep };
enum class NoiseType { kNone, kSymmetric, kAsymmetric };

struct DatasetBlock {
  DataSource source = DataSource::kBlobs;
  std::size_t classes = 4;
  // blobs
  std::size_t per_class = 100;
  std::size_t dim = 2;
  double separation = 4.0;
  // idx: images/labels; csv: path. Optional held-out files replace the split.
  std::string images;
  std::string labels;
  std::string test_images;
  std::string test_labels;
  std::string path;
  std::string test_path;
  double test_fraction = 0.25;
  std::uint64_t seed = 0;
  Imbalance imbalance = Imbalance::kNone;
  double imbalance_ratio = 1.0;
  double minority_fraction = 0.5;

  bool operator==(const DatasetBlock&) const = default;
};

struct NoiseBlock {
  NoiseType type = NoiseType::kNone;
  double eta = 0.0;
  std::optional<FlipPreset> preset;  // asymmetric only; or map_file
  std::string map_file;

  bool operator==(const NoiseBlock&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  DatasetBlock dataset;
  NoiseBlock noise;
  LossSpec loss;
  std::optional<SRConfig> sr;
  std::vector<std::size_t> hidden;
  OptimizerConfig optim;

  // Throws DomainError on values outside their owners' ranges.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Flat `key = value` lines with dotted section prefixes; `#` starts a comment
// line. Preset keys (loss.preset, sr.preset) are applied before explicit
// keys regardless of line order. Unknown or repeated keys are errors.
// Throws FormatError naming `source:line` and the key.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved form (no preset keys); parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

std::string_view to_string(DataSource source);
std::string_view to_string(Imbalance imbalance);
std::string_view to_string(NoiseType type);

}  // namespace sparsereg
