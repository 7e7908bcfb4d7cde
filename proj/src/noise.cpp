#include "sparsereg/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "sparsereg/error.hpp"
#include "sparsereg/random.hpp"

namespace sparsereg {

namespace {

constexpr double kRowSumTolerance = 1e-12;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::size_t parse_class(const std::string& text, std::size_t line_no) {
  std::size_t pos = 0;
  unsigned long value = 0;
  try {
    value = std::stoul(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || text.front() == '-') {
    throw FormatError("flip map line " + std::to_string(line_no) + ": '" + text +
                      "' is not a class index");
  }
  return value;
}

}  // namespace

TransitionMatrix::TransitionMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw DomainError("transition matrix must be square and non-empty, got " +
                      entries_.shape_string());
  }
  for (std::size_t r = 0; r < entries_.rows(); ++r) {
    double total = 0.0;
    for (double v : entries_.row(r)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DomainError("transition entry outside [0, 1] in row " + std::to_string(r));
      }
      total += v;
    }
    if (std::abs(total - 1.0) > kRowSumTolerance) {
      throw DomainError("transition row " + std::to_string(r) + " sums to " +
                        std::to_string(total));
    }
  }
}

TransitionMatrix TransitionMatrix::identity(std::size_t classes) {
  Matrix m(classes, classes);
  for (std::size_t i = 0; i < classes; ++i) m(i, i) = 1.0;
  return TransitionMatrix(std::move(m));
}

bool TransitionMatrix::below_symmetric_bound() const {
  const double bound = 1.0 - 1.0 / static_cast<double>(classes());
  for (std::size_t y = 0; y < classes(); ++y) {
    if (!(flip_rate(y) < bound)) return false;
  }
  return true;
}

std::optional<double> TransitionMatrix::symmetric_rate(double tolerance) const {
  const std::size_t k = classes();
  if (k < 2) return 0.0;
  const double eta = flip_rate(0);
  const double off = eta / static_cast<double>(k - 1);
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t j = 0; j < k; ++j) {
      const double expected = y == j ? 1.0 - eta : off;
      if (std::abs(entries_(y, j) - expected) > tolerance) return std::nullopt;
    }
  }
  return eta;
}

TransitionMatrix symmetric_transition(std::size_t classes, double eta) {
  if (classes < 2) throw DomainError("symmetric noise needs at least 2 classes");
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw DomainError("symmetric noise rate must lie in [0, 1), got " + std::to_string(eta));
  }
  Matrix m(classes, classes, eta / static_cast<double>(classes - 1));
  for (std::size_t i = 0; i < classes; ++i) m(i, i) = 1.0 - eta;
  return TransitionMatrix(std::move(m));
}

std::string_view to_string(FlipPreset preset) {
  switch (preset) {
    case FlipPreset::kMnist: return "mnist";
    case FlipPreset::kCifar10: return "cifar10";
    case FlipPreset::kCifar100Superclass: return "cifar100_superclass";
  }
  return "?";
}

FlipPreset parse_flip_preset(std::string_view name) {
  for (FlipPreset p : {FlipPreset::kMnist, FlipPreset::kCifar10, FlipPreset::kCifar100Superclass}) {
    if (to_string(p) == name) return p;
  }
  throw FormatError("unknown flip preset '" + std::string(name) + "'");
}

const std::vector<std::vector<std::size_t>>& cifar100_superclasses() {
  static const std::vector<std::vector<std::size_t>> table = {
#include "cifar100_superclasses.inc"
  };
  return table;
}

FlipMap flip_map(FlipPreset preset) {
  switch (preset) {
    // 2 -> 7, 7 -> 1, 5 <-> 6, 3 -> 8
    case FlipPreset::kMnist: return {{2, 7}, {7, 1}, {5, 6}, {6, 5}, {3, 8}};
    // truck -> automobile, bird -> airplane, deer -> horse, cat <-> dog
    case FlipPreset::kCifar10: return {{9, 1}, {2, 0}, {4, 7}, {3, 5}, {5, 3}};
    case FlipPreset::kCifar100Superclass: {
      FlipMap map;
      for (const auto& group : cifar100_superclasses()) {
        for (std::size_t i = 0; i < group.size(); ++i) {
          map.emplace_back(group[i], group[(i + 1) % group.size()]);
        }
      }
      return map;
    }
  }
  return {};
}

std::size_t preset_classes(FlipPreset preset) {
  return preset == FlipPreset::kCifar100Superclass ? 100 : 10;
}

FlipMap parse_flip_map(std::istream& in) {
  FlipMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto arrow = body.find("->");
    if (arrow == std::string::npos) {
      throw FormatError("flip map line " + std::to_string(line_no) + ": expected 'source->target'");
    }
    map.emplace_back(parse_class(trim(body.substr(0, arrow)), line_no),
                     parse_class(trim(body.substr(arrow + 2)), line_no));
  }
  return map;
}

FlipMap read_flip_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open flip map '" + path.string() + "'");
  return parse_flip_map(in);
}

TransitionMatrix asymmetric_transition(const FlipMap& map, std::size_t classes, double eta) {
  if (!(eta >= 0.0 && eta <= 0.5)) {
    throw DomainError("pairwise flip rate must lie in [0, 0.5], got " + std::to_string(eta));
  }
  Matrix m(classes, classes);
  for (std::size_t i = 0; i < classes; ++i) m(i, i) = 1.0;
  std::vector<bool> seen(classes, false);
  for (const auto& [source, target] : map) {
    if (source >= classes || target >= classes) {
      throw DomainError("flip " + std::to_string(source) + "->" + std::to_string(target) +
                        " out of range for " + std::to_string(classes) + " classes");
    }
    if (source == target) {
      throw DomainError("flip map sends class " + std::to_string(source) + " to itself");
    }
    if (seen[source]) {
      throw DomainError("flip map lists source class " + std::to_string(source) + " twice");
    }
    seen[source] = true;
    m(source, source) = 1.0 - eta;
    m(source, target) = eta;
  }
  return TransitionMatrix(std::move(m));
}

TransitionMatrix asymmetric_transition(FlipPreset preset, std::size_t classes, double eta) {
  return asymmetric_transition(flip_map(preset), classes, eta);
}

Corruption corrupt(std::span<const std::size_t> labels, const TransitionMatrix& transition,
                   std::uint64_t seed) {
  const std::size_t k = transition.classes();
  // Cumulative rows; the last entry is pinned to 1 so every draw lands.
  Matrix cdf(k, k);
  for (std::size_t y = 0; y < k; ++y) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      acc += transition(y, j);
      cdf(y, j) = acc;
    }
    cdf(y, k - 1) = 1.0;
  }

  Rng rng = make_rng({seed, 0x6e6f697365ULL});
  Corruption out;
  out.labels.resize(labels.size());
  out.flipped.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t y = labels[i];
    if (y >= k) {
      throw DomainError("label " + std::to_string(y) + " out of range for " + std::to_string(k) +
                        " classes");
    }
    const double draw = uniform01(rng);
    const auto row = cdf.row(y);
    std::size_t j = 0;
    while (j + 1 < k && draw >= row[j]) ++j;
    // Only the pinned last column can be hit with zero mass.
    while (j > 0 && transition(y, j) == 0.0) --j;
    out.labels[i] = j;
    out.flipped[i] = j != y;
  }
  return out;
}

FlipRates empirical_rate(std::span<const std::size_t> clean, std::span<const std::size_t> noisy,
                         std::size_t classes) {
  if (clean.size() != noisy.size()) {
    throw ShapeError("empirical_rate on label arrays of length " + std::to_string(clean.size()) +
                     " and " + std::to_string(noisy.size()));
  }
  std::vector<std::size_t> count(classes, 0);
  std::vector<std::size_t> flips(classes, 0);
  std::size_t total_flips = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] >= classes) throw DomainError("label out of range in empirical_rate");
    ++count[clean[i]];
    if (clean[i] != noisy[i]) {
      ++flips[clean[i]];
      ++total_flips;
    }
  }
  FlipRates rates;
  rates.per_class.resize(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] > 0) rates.per_class[c] = static_cast<double>(flips[c]) / count[c];
  }
  if (!clean.empty()) rates.overall = static_cast<double>(total_flips) / clean.size();
  return rates;
}

}  // namespace sparsereg
