#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "sparsereg/matrix.hpp"

namespace sparsereg {

// k x k row-stochastic matrix; entry (y, j) is the probability that a clean
// label y is observed as j.
class TransitionMatrix {
 public:
  // Throws DomainError unless square, entries in [0, 1], rows summing to 1
  // within 1e-12.
  explicit TransitionMatrix(Matrix entries);

  static TransitionMatrix identity(std::size_t classes);

  std::size_t classes() const noexcept { return entries_.rows(); }
  double operator()(std::size_t clean, std::size_t observed) const {
    return entries_(clean, observed);
  }
  const Matrix& entries() const noexcept { return entries_; }

  // eta_y = 1 - T(y, y).
  double flip_rate(std::size_t clean) const { return 1.0 - entries_(clean, clean); }
  // Every row satisfies eta_y < 1 - 1/k.
  bool below_symmetric_bound() const;
  // eta when the matrix has the uniform off-diagonal form, nullopt otherwise.
  std::optional<double> symmetric_rate(double tolerance = 1e-12) const;

  bool operator==(const TransitionMatrix&) const = default;

 private:
  Matrix entries_;
};

// Diagonal 1 - eta, off-diagonal eta / (k - 1). Requires 0 <= eta < 1.
TransitionMatrix symmetric_transition(std::size_t classes, double eta);

enum class FlipPreset { kMnist, kCifar10, kCifar100Superclass };

std::string_view to_string(FlipPreset preset);
FlipPreset parse_flip_preset(std::string_view name);

// (source, target) class pairs.
using FlipMap = std::vector<std::pair<std::size_t, std::size_t>>;

FlipMap flip_map(FlipPreset preset);
// Number of classes the preset is defined over (10 or 100).
std::size_t preset_classes(FlipPreset preset);

// CIFAR-100 fine-label indices grouped by super-class, 20 groups of 5.
const std::vector<std::vector<std::size_t>>& cifar100_superclasses();

// One `source->target` pair per line; blank lines and `#` comments ignored.
FlipMap parse_flip_map(std::istream& in);
FlipMap read_flip_map(const std::filesystem::path& path);

// Mapped rows get (y, y) = 1 - eta and (y, target) = eta; other rows are
// identity. Requires 0 <= eta <= 0.5 and in-range, non-repeating sources.
TransitionMatrix asymmetric_transition(const FlipMap& map, std::size_t classes, double eta);
TransitionMatrix asymmetric_transition(FlipPreset preset, std::size_t classes, double eta);

struct Corruption {
  std::vector<std::size_t> labels;
  std::vector<bool> flipped;
};

// Resamples every label independently from its row of `transition`.
Corruption corrupt(std::span<const std::size_t> labels, const TransitionMatrix& transition,
                   std::uint64_t seed);

struct FlipRates {
  std::vector<double> per_class;  // by clean class; 0 for absent classes
  double overall = 0.0;
};

FlipRates empirical_rate(std::span<const std::size_t> clean, std::span<const std::size_t> noisy,
                         std::size_t classes);

}  // namespace sparsereg
