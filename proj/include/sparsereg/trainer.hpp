#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sparsereg/autodiff.hpp"
#include "sparsereg/data.hpp"
#include "sparsereg/losses.hpp"
#include "sparsereg/matrix.hpp"

namespace sparsereg {

enum class Activation { kRelu };

struct MLPConfig {
  // Input width, hidden widths..., output width (= class count). Two entries
  // give a linear model.
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const MLPConfig&) const = default;
};

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  Matrix bias;    // 1 x fan_out
  bool operator==(const DenseLayer&) const = default;
};

struct Mlp {
  MLPConfig config;
  std::vector<DenseLayer> layers;

  std::size_t input_width() const { return layers.front().weight.rows(); }
  std::size_t classes() const { return layers.back().weight.cols(); }
  bool operator==(const Mlp&) const = default;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
Mlp init_mlp(const MLPConfig& cfg);

// Adds the network to `builder` with parameters "w<i>" / "b<i>"; returns the
// logits node.
NodeId add_mlp(GraphBuilder& builder, const Mlp& model, NodeId x);

Matrix mlp_logits(const Mlp& model, const Matrix& features);

// Row-wise softmax(z_hat / tau) where z_hat is the l2-normalized logit row
// when `l2_normalize` is set.
Matrix sharpen_logits(const Matrix& logits, double tau, bool l2_normalize);

// SR models: l2 normalization (when configured) then softmax_tau. Otherwise
// the plain softmax.
Matrix predict_probs(const Mlp& model, const Matrix& features, const std::optional<SRConfig>& sr);

// Fraction of rows whose largest entry exceeds `threshold`.
double sparse_rate(const Matrix& probs, double threshold = 0.99);

// Fraction of rows whose argmax equals the label.
double accuracy(const Matrix& scores, std::span<const std::size_t> labels);

struct OptimizerConfig {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  bool cosine_annealing = true;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

// lr0 * (1 + cos(pi t / T)) / 2.
double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0);

// Heavy-ball SGD: v <- momentum v + (g + weight_decay w); w <- w - lr v.
class SgdMomentum {
 public:
  SgdMomentum(double momentum, double weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(Graph& graph, const GradientSet& grads, double lr);

 private:
  double momentum_;
  double weight_decay_;
  GradientSet velocity_;
};

// Temperature and threshold of the sparse-rate measurement.
inline constexpr double kSparseRateTau = 0.1;
inline constexpr double kSparseRateThreshold = 0.99;

struct EpochRecord {
  std::size_t epoch = 0;
  double lambda = 0.0;
  double lr = 0.0;
  double train_objective = 0.0;
  double train_accuracy = 0.0;  // against the (possibly noisy) training labels
  double test_accuracy = 0.0;
  double sparse_rate = 0.0;     // test set, tau = 0.1, threshold 0.99
  bool operator==(const EpochRecord&) const = default;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  Mlp model;
  LossSpec loss;
  std::optional<SRConfig> sr;
  OptimizerConfig optimizer;
  bool operator==(const RunRecord&) const = default;
};

// Mini-batch training of `model` on `train_set`; metrics are recorded after
// every epoch. Throws DivergenceError on a non-finite objective or gradient.
RunRecord train(Mlp model, const LabeledDataset& train_set, const LabeledDataset& test_set,
                const LossSpec& loss, const std::optional<SRConfig>& sr,
                const OptimizerConfig& opt);

// Binary checkpoint: "SRCK", u32 version, u32 layer count, then per layer the
// weight and bias as (u64 rows, u64 cols, little-endian doubles).
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Mlp& model, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace sparsereg
