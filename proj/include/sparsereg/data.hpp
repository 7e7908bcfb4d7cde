#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sparsereg/matrix.hpp"

namespace sparsereg {

struct LabeledDataset {
  Matrix features;  // N x d
  std::vector<std::size_t> labels;
  std::size_t classes = 0;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  std::vector<std::size_t> class_counts() const;
  // Rows listed in `indices`, in that order.
  LabeledDataset select(std::span<const std::size_t> indices) const;
  // Throws ShapeError/DomainError when rows, labels and classes disagree.
  void validate() const;

  bool operator==(const LabeledDataset&) const = default;
};

// k isotropic unit-variance Gaussians. Class c is centred at
// separation * e_c when d >= k, otherwise at separation times the unit vector
// at angle 2 pi c / k in the first two coordinates. Features are z-scored per
// dimension afterwards. Rows are grouped by class.
LabeledDataset gaussian_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                              double separation, std::uint64_t seed);

// IDX pair (magic 2051 images, 2049 labels, big-endian). Pixels scaled to [0, 1].
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t classes = 10);

// Writes features as unsigned bytes round(255 x) with the given image geometry.
void write_idx(const LabeledDataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels, std::size_t image_rows,
               std::size_t image_cols);

// `label,f1,f2,...` per line, no header. classes = 0 infers max label + 1.
LabeledDataset load_csv(const std::filesystem::path& path, std::size_t classes = 0);

// Uniform draw without replacement of counts[c] rows from each class c.
LabeledDataset subsample_per_class(const LabeledDataset& ds, std::span<const std::size_t> counts,
                                   std::uint64_t seed);

// round(n_max * mu^(c / (k - 1))) for c = 0..k-1.
std::vector<std::size_t> long_tailed_counts(std::size_t n_max, double mu, std::size_t classes);

// The last ceil(k * minority_fraction) classes get round(n_max * mu), the rest n_max.
std::vector<std::size_t> step_counts(std::size_t n_max, double mu, std::size_t classes,
                                     double minority_fraction);

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

// Stratified split; each class contributes round(n_c * test_fraction) rows to
// the test side, clamped to [1, n_c - 1]. Rows keep their original order.
TrainTestSplit split(const LabeledDataset& ds, double test_fraction, std::uint64_t seed);

}  // namespace sparsereg
