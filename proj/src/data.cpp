#include "sparsereg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "sparsereg/error.hpp"
#include "sparsereg/random.hpp"

namespace sparsereg {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw FormatError("'" + path.string() + "' truncated: expected at least " +
                      std::to_string(offset + 4) + " bytes, got " + std::to_string(bytes.size()));
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

void require_size(const std::vector<unsigned char>& bytes, std::size_t expected,
                  const std::filesystem::path& path) {
  if (bytes.size() != expected) {
    throw FormatError("'" + path.string() + "' has wrong size: expected " +
                      std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  }
}

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledDataset& ds) {
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  return by_class;
}

}  // namespace

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t y : labels) {
    if (y < classes) ++counts[y];
  }
  return counts;
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.features = features.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.classes = classes;
  out.name = name;
  return out;
}

void LabeledDataset::validate() const {
  if (features.rows() != labels.size()) {
    throw ShapeError("dataset '" + name + "' has " + std::to_string(features.rows()) +
                     " feature rows but " + std::to_string(labels.size()) + " labels");
  }
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw DomainError("dataset '" + name + "' has label " + std::to_string(y) + " but only " +
                        std::to_string(classes) + " classes");
    }
  }
}

LabeledDataset gaussian_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                              double separation, std::uint64_t seed) {
  if (classes < 2) throw DomainError("gaussian_blobs needs at least 2 classes");
  if (dim < 2) throw DomainError("gaussian_blobs needs at least 2 dimensions");
  if (per_class < 1) throw DomainError("gaussian_blobs needs at least one sample per class");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw DomainError("gaussian_blobs separation must be finite and >= 0");
  }

  Matrix centers(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    if (dim >= classes) {
      centers(c, c) = separation;
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / classes;
      centers(c, 0) = separation * std::cos(angle);
      centers(c, 1) = separation * std::sin(angle);
    }
  }

  Rng rng = make_rng({seed, 0x626c6f6273ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset ds;
  ds.classes = classes;
  ds.name = "blobs";
  ds.features = Matrix(classes * per_class, dim);
  ds.labels.reserve(classes * per_class);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t n = 0; n < per_class; ++n) {
      auto row = ds.features.row(ds.labels.size());
      for (std::size_t j = 0; j < dim; ++j) row[j] = centers(c, j) + normal(rng);
      ds.labels.push_back(c);
    }
  }

  const std::size_t rows = ds.features.rows();
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < rows; ++i) mean += ds.features(i, j);
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t i = 0; i < rows; ++i) var += (ds.features(i, j) - mean) * (ds.features(i, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
      ds.features(i, j) = sd > 0.0 ? (ds.features(i, j) - mean) / sd : 0.0;
    }
  }
  return ds;
}

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t classes) {
  const auto image_bytes = read_bytes(images);
  const auto label_bytes = read_bytes(labels);

  if (read_be32(image_bytes, 0, images) != kIdxImagesMagic) {
    throw FormatError("'" + images.string() + "' is not an IDX image file (bad magic)");
  }
  if (read_be32(label_bytes, 0, labels) != kIdxLabelsMagic) {
    throw FormatError("'" + labels.string() + "' is not an IDX label file (bad magic)");
  }
  const std::size_t count = read_be32(image_bytes, 4, images);
  const std::size_t rows = read_be32(image_bytes, 8, images);
  const std::size_t cols = read_be32(image_bytes, 12, images);
  const std::size_t label_count = read_be32(label_bytes, 4, labels);
  if (count != label_count) {
    throw FormatError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                      std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = rows * cols;
  require_size(image_bytes, 16 + count * pixels, images);
  require_size(label_bytes, 8 + count, labels);

  LabeledDataset ds;
  ds.classes = classes;
  ds.name = images.stem().string();
  ds.features = Matrix(count, pixels);
  auto values = ds.features.values();
  for (std::size_t i = 0; i < count * pixels; ++i) values[i] = image_bytes[16 + i] / 255.0;
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.labels[i] = label_bytes[8 + i];
    if (ds.labels[i] >= classes) {
      throw DomainError("'" + labels.string() + "' entry " + std::to_string(i) + " has label " +
                        std::to_string(ds.labels[i]) + " >= " + std::to_string(classes));
    }
  }
  return ds;
}

void write_idx(const LabeledDataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels, std::size_t image_rows,
               std::size_t image_cols) {
  ds.validate();
  if (image_rows * image_cols != ds.dim()) {
    throw ShapeError("image geometry " + std::to_string(image_rows) + "x" +
                     std::to_string(image_cols) + " does not match feature width " +
                     std::to_string(ds.dim()));
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw FormatError("cannot open IDX output files for writing");
  write_be32(img, kIdxImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(ds.size()));
  write_be32(img, static_cast<std::uint32_t>(image_rows));
  write_be32(img, static_cast<std::uint32_t>(image_cols));
  for (double v : ds.features.values()) {
    const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    img.put(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  write_be32(lab, kIdxLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (std::size_t y : ds.labels) {
    if (y > 255) throw DomainError("IDX labels must fit in one byte");
    lab.put(static_cast<char>(static_cast<unsigned char>(y)));
  }
}

LabeledDataset load_csv(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  LabeledDataset ds;
  ds.name = path.stem().string();
  std::vector<double> values;
  std::size_t width = 0;
  std::size_t max_label = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream fields(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(fields, cell, ',')) {
      std::size_t pos = 0;
      try {
        if (first) {
          const long label = std::stol(cell, &pos);
          if (label < 0) throw std::out_of_range("negative");
          ds.labels.push_back(static_cast<std::size_t>(label));
          max_label = std::max(max_label, ds.labels.back());
        } else {
          row.push_back(std::stod(cell, &pos));
        }
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != cell.size()) {
        throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) +
                          ": cannot parse field '" + cell + "'");
      }
      first = false;
    }
    if (ds.labels.size() == 1 && width == 0) width = row.size();
    if (row.size() != width || width == 0) {
      throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected " +
                        std::to_string(width) + " feature columns, got " +
                        std::to_string(row.size()));
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  ds.classes = classes == 0 ? (ds.labels.empty() ? 0 : max_label + 1) : classes;
  ds.features = Matrix(ds.labels.size(), width, std::move(values));
  ds.validate();
  return ds;
}

LabeledDataset subsample_per_class(const LabeledDataset& ds, std::span<const std::size_t> counts,
                                   std::uint64_t seed) {
  ds.validate();
  if (counts.size() != ds.classes) {
    throw ShapeError("subsample_per_class given " + std::to_string(counts.size()) +
                     " targets for " + std::to_string(ds.classes) + " classes");
  }
  auto by_class = indices_by_class(ds);
  Rng rng = make_rng({seed, 0x73756273ULL});
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < ds.classes; ++c) {
    auto& pool = by_class[c];
    if (counts[c] > pool.size()) {
      throw DomainError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                        " samples, " + std::to_string(counts[c]) + " requested");
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(counts[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  return ds.select(chosen);
}

std::vector<std::size_t> long_tailed_counts(std::size_t n_max, double mu, std::size_t classes) {
  if (!(mu > 0.0 && mu <= 1.0)) throw DomainError("imbalance ratio must lie in (0, 1]");
  if (classes < 2) throw DomainError("long-tailed profile needs at least 2 classes");
  std::vector<std::size_t> counts(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double exponent = static_cast<double>(c) / static_cast<double>(classes - 1);
    counts[c] = static_cast<std::size_t>(std::llround(static_cast<double>(n_max) * std::pow(mu, exponent)));
  }
  return counts;
}

std::vector<std::size_t> step_counts(std::size_t n_max, double mu, std::size_t classes,
                                     double minority_fraction) {
  if (!(mu > 0.0 && mu <= 1.0)) throw DomainError("imbalance ratio must lie in (0, 1]");
  if (!(minority_fraction > 0.0 && minority_fraction < 1.0)) {
    throw DomainError("minority fraction must lie in (0, 1)");
  }
  const auto minority = static_cast<std::size_t>(
      std::ceil(static_cast<double>(classes) * minority_fraction));
  const auto small = static_cast<std::size_t>(std::llround(static_cast<double>(n_max) * mu));
  std::vector<std::size_t> counts(classes, n_max);
  for (std::size_t c = classes - std::min(minority, classes); c < classes; ++c) counts[c] = small;
  return counts;
}

TrainTestSplit split(const LabeledDataset& ds, double test_fraction, std::uint64_t seed) {
  ds.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("test fraction must lie in (0, 1)");
  }
  auto by_class = indices_by_class(ds);
  Rng rng = make_rng({seed, 0x73706c6974ULL});
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t c = 0; c < ds.classes; ++c) {
    auto& pool = by_class[c];
    if (pool.empty()) continue;
    if (pool.size() < 2) {
      throw DomainError("class " + std::to_string(c) + " has fewer than 2 samples; cannot split");
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(pool.size()) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, pool.size() - 1);
    test_idx.insert(test_idx.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.insert(train_idx.end(), pool.begin() + static_cast<std::ptrdiff_t>(n_test), pool.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  TrainTestSplit out{ds.select(train_idx), ds.select(test_idx)};
  out.train.name = ds.name + "-train";
  out.test.name = ds.name + "-test";
  return out;
}

}  // namespace sparsereg
