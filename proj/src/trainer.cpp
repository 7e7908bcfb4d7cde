#include "sparsereg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sparsereg/error.hpp"
#include "sparsereg/primitives.hpp"
#include "sparsereg/random.hpp"

namespace sparsereg {

namespace {

std::string weight_name(std::size_t i) { return "w" + std::to_string(i); }
std::string bias_name(std::size_t i) { return "b" + std::to_string(i); }

void check_compatible(const Mlp& model, const LabeledDataset& ds) {
  ds.validate();
  if (ds.dim() != model.input_width()) {
    throw ShapeError("dataset '" + ds.name + "' has " + std::to_string(ds.dim()) +
                     " features, model expects " + std::to_string(model.input_width()));
  }
  if (ds.classes != model.classes()) {
    throw ShapeError("dataset '" + ds.name + "' has " + std::to_string(ds.classes) +
                     " classes, model outputs " + std::to_string(model.classes()));
  }
}

bool all_finite(const GradientSet& grads) {
  return std::all_of(grads.begin(), grads.end(),
                     [](const auto& entry) { return entry.second.all_finite(); });
}

}  // namespace

void MLPConfig::validate() const {
  if (layer_widths.size() < 2) {
    throw DomainError("MLP needs at least an input and an output width");
  }
  for (std::size_t w : layer_widths) {
    if (w == 0) throw DomainError("MLP layer widths must be positive");
  }
}

Mlp init_mlp(const MLPConfig& cfg) {
  cfg.validate();
  Mlp model;
  model.config = cfg;
  Rng rng = make_rng({cfg.seed, 0x6d6c70ULL});
  for (std::size_t i = 0; i + 1 < cfg.layer_widths.size(); ++i) {
    const std::size_t fan_in = cfg.layer_widths[i];
    const std::size_t fan_out = cfg.layer_widths[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Matrix(fan_in, fan_out), Matrix(1, fan_out)};
    for (double& w : layer.weight.values()) w = dist(rng);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

NodeId add_mlp(GraphBuilder& b, const Mlp& model, NodeId x) {
  NodeId h = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const NodeId w = b.parameter(weight_name(i), model.layers[i].weight);
    const NodeId bias = b.parameter(bias_name(i), model.layers[i].bias);
    h = b.affine(h, w, bias);
    if (i + 1 < model.layers.size()) h = b.relu(h);
  }
  return h;
}

Matrix mlp_logits(const Mlp& model, const Matrix& features) {
  if (features.cols() != model.input_width()) {
    throw ShapeError("features have " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(model.input_width()));
  }
  Matrix h = features;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    Matrix next = matmul(h, layer.weight);
    for (std::size_t r = 0; r < next.rows(); ++r) {
      auto row = next.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        row[c] += layer.bias(0, c);
        if (i + 1 < model.layers.size() && row[c] < 0.0) row[c] = 0.0;
      }
    }
    h = std::move(next);
  }
  return h;
}

Matrix sharpen_logits(const Matrix& logits, double tau, bool l2_normalize_rows) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::vector<double> probs;
    if (l2_normalize_rows) {
      probs = softmax_tau(l2_normalize(logits.row(r)).values, tau);
    } else {
      probs = softmax_tau(logits.row(r), tau);
    }
    std::copy(probs.begin(), probs.end(), out.row(r).begin());
  }
  return out;
}

Matrix predict_probs(const Mlp& model, const Matrix& features, const std::optional<SRConfig>& sr) {
  const Matrix logits = mlp_logits(model, features);
  if (!sr) return sharpen_logits(logits, 1.0, false);
  return sharpen_logits(logits, sr->tau, sr->l2_normalize_logits);
}

double sparse_rate(const Matrix& probs, double threshold) {
  if (probs.rows() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto row = probs.row(r);
    if (*std::max_element(row.begin(), row.end()) > threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

double accuracy(const Matrix& scores, std::span<const std::size_t> labels) {
  if (scores.rows() != labels.size()) {
    throw ShapeError("accuracy given " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(scores.rows()) + " rows");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void OptimizerConfig::validate() const {
  if (!(lr0 > 0.0)) throw DomainError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw DomainError("weight decay must be >= 0");
  if (batch_size == 0) throw DomainError("batch size must be positive");
}

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0) {
  if (total_epochs == 0) return lr0;
  const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return lr0 * 0.5 * (1.0 + std::cos(phase));
}

void SgdMomentum::step(Graph& graph, const GradientSet& grads, double lr) {
  for (const auto& [name, grad] : grads) {
    Matrix& param = graph.parameter(name);
    auto [it, inserted] = velocity_.try_emplace(name, param.rows(), param.cols());
    auto v = it->second.values();
    auto w = param.values();
    const auto g = grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + (g[i] + weight_decay_ * w[i]);
      w[i] -= lr * v[i];
    }
  }
}

RunRecord train(Mlp model, const LabeledDataset& train_set, const LabeledDataset& test_set,
                const LossSpec& loss, const std::optional<SRConfig>& sr,
                const OptimizerConfig& opt) {
  opt.validate();
  loss.validate();
  if (sr) sr->validate();
  check_compatible(model, train_set);
  check_compatible(model, test_set);

  RunRecord record;
  record.loss = loss;
  record.sr = sr;
  record.optimizer = opt;

  const std::size_t k = model.classes();
  GraphBuilder b;
  const NodeId x = b.input("x", model.input_width());
  const NodeId targets = b.input("targets", k);
  const NodeId lambda = b.input("lambda", 1, 1);
  const NodeId logits = add_mlp(b, model, x);
  const ObjectiveNodes nodes = add_objective(b, loss, sr, logits, targets, lambda);
  Graph graph = b.build(nodes.objective);

  SgdMomentum optimizer(opt.momentum, opt.weight_decay);
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    EpochRecord row;
    row.epoch = epoch;
    row.lr = opt.cosine_annealing ? cosine_lr(epoch, opt.epochs, opt.lr0) : opt.lr0;
    row.lambda = sr ? lambda_at(epoch, *sr) : 0.0;

    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng({opt.seed, epoch, 0x7368756666ULL});
    std::shuffle(order.begin(), order.end(), rng);

    double objective_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += opt.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + opt.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      std::vector<std::size_t> batch_labels;
      batch_labels.reserve(idx.size());
      for (std::size_t i : idx) batch_labels.push_back(train_set.labels[i]);

      Inputs inputs;
      inputs.emplace("x", train_set.features.gather_rows(idx));
      inputs.emplace("targets", one_hot(batch_labels, k));
      inputs.emplace("lambda", Matrix(1, 1, row.lambda));
      const Tape tape = graph.forward(inputs);
      const double value = tape.output()(0, 0);
      if (!std::isfinite(value)) throw DivergenceError(epoch, batch_index, "non-finite objective");
      const GradientSet grads = graph.backward(tape);
      if (!all_finite(grads)) throw DivergenceError(epoch, batch_index, "non-finite gradient");
      optimizer.step(graph, grads, row.lr);
      objective_sum += value * static_cast<double>(idx.size());
    }
    row.train_objective = n > 0 ? objective_sum / static_cast<double>(n) : 0.0;

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      model.layers[i].weight = graph.parameter(weight_name(i));
      model.layers[i].bias = graph.parameter(bias_name(i));
    }
    row.train_accuracy = accuracy(mlp_logits(model, train_set.features), train_set.labels);
    const Matrix test_logits = mlp_logits(model, test_set.features);
    row.test_accuracy = accuracy(test_logits, test_set.labels);
    const bool normalize = sr && sr->l2_normalize_logits;
    row.sparse_rate =
        sparse_rate(sharpen_logits(test_logits, kSparseRateTau, normalize), kSparseRateThreshold);
    record.epochs.push_back(row);
  }

  record.model = std::move(model);
  return record;
}

}  // namespace sparsereg
