#include "sparsereg/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "sparsereg/error.hpp"
#include "sparsereg/primitives.hpp"

namespace sparsereg {

namespace {

constexpr double kSimplexTolerance = 1e-9;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void check_simplex(std::span<const double> u) {
  double total = 0.0;
  for (double v : u) {
    if (!std::isfinite(v) || v < -kSimplexTolerance) {
      throw DomainError("loss input is not on the probability simplex (entry " +
                        std::to_string(v) + ")");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw DomainError("loss input is not on the probability simplex (sum " +
                      std::to_string(total) + ")");
  }
}

double ce_term(std::span<const double> u, std::size_t y) { return -clamped_log(u[y]); }

double nce_term(std::span<const double> u, std::size_t y) {
  double denom = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) denom += ce_term(u, j);
  return ce_term(u, y) / denom;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCE: return "ce";
    case LossKind::kFL: return "fl";
    case LossKind::kGCE: return "gce";
    case LossKind::kMAE: return "mae";
    case LossKind::kRCE: return "rce";
    case LossKind::kSCE: return "sce";
    case LossKind::kNCE: return "nce";
    case LossKind::kAPL: return "apl";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  const std::string key = lower(name);
  for (LossKind kind : kAllLossKinds) {
    if (to_string(kind) == key) return kind;
  }
  throw FormatError("unknown loss kind '" + std::string(name) + "'");
}

std::string_view to_string(Benchmark benchmark) {
  switch (benchmark) {
    case Benchmark::kMnist: return "mnist";
    case Benchmark::kCifar10: return "cifar10";
    case Benchmark::kCifar100: return "cifar100";
    case Benchmark::kWebVision: return "webvision";
  }
  return "?";
}

Benchmark parse_benchmark(std::string_view name) {
  const std::string key = lower(name);
  for (Benchmark b : {Benchmark::kMnist, Benchmark::kCifar10, Benchmark::kCifar100,
                      Benchmark::kWebVision}) {
    if (to_string(b) == key) return b;
  }
  throw FormatError("unknown benchmark preset '" + std::string(name) + "'");
}

void LossSpec::validate() const {
  if (!(gce_q > 0.0 && gce_q <= 1.0)) throw DomainError("GCE q must lie in (0, 1]");
  if (!(rce_a < 0.0)) throw DomainError("RCE clamp A must be negative");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw DomainError("mixture weights must be >= 0");
  if (!(focal_gamma >= 0.0)) throw DomainError("focal exponent must be >= 0");
}

LossSpec LossSpec::of(LossKind kind) {
  LossSpec spec;
  spec.kind = kind;
  return spec;
}

LossSpec LossSpec::sce(Benchmark benchmark) {
  LossSpec spec = of(LossKind::kSCE);
  switch (benchmark) {
    case Benchmark::kMnist: spec.alpha = 0.01; spec.beta = 1.0; break;
    case Benchmark::kCifar10: spec.alpha = 0.1; spec.beta = 1.0; break;
    case Benchmark::kCifar100: spec.alpha = 6.0; spec.beta = 0.1; break;
    case Benchmark::kWebVision:
      spec.alpha = 10.0;
      spec.beta = 1.0;
      spec.rce_a = -4.0;
      break;
  }
  return spec;
}

LossSpec LossSpec::apl(Benchmark benchmark) {
  LossSpec spec = of(LossKind::kAPL);
  switch (benchmark) {
    case Benchmark::kMnist: spec.alpha = 1.0; spec.beta = 100.0; break;
    case Benchmark::kCifar10: spec.alpha = 1.0; spec.beta = 1.0; break;
    case Benchmark::kCifar100: spec.alpha = 10.0; spec.beta = 0.1; break;
    case Benchmark::kWebVision: spec.alpha = 50.0; spec.beta = 0.1; break;
  }
  return spec;
}

void SRConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("SR temperature must lie in (0, 1]");
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("SR norm exponent p must lie in (0, 1]");
  if (!(lambda0 >= 0.0)) throw DomainError("SR lambda0 must be >= 0");
  if (!(rho >= 1.0)) throw DomainError("SR growth factor rho must be >= 1");
  if (r < 1) throw DomainError("SR update interval r must be >= 1");
}

SRConfig SRConfig::preset(Benchmark benchmark, bool symmetric_noise) {
  switch (benchmark) {
    case Benchmark::kMnist: return {0.1, 0.1, 4.0, 2.0, 5, true};
    case Benchmark::kCifar10: return {0.5, 0.1, 1.1, 1.03, 1, true};
    case Benchmark::kCifar100: return {0.5, 0.01, symmetric_noise ? 10.0 : 4.0, 1.02, 1, true};
    case Benchmark::kWebVision: return {0.5, 0.01, 2.0, 1.02, 1, true};
  }
  return {};
}

double pointwise_loss(const LossSpec& spec, std::span<const double> u, std::size_t label) {
  if (label >= u.size()) {
    throw DomainError("label " + std::to_string(label) + " out of range for " +
                      std::to_string(u.size()) + " classes");
  }
  check_simplex(u);
  const double uy = u[label];
  switch (spec.kind) {
    case LossKind::kCE: return ce_term(u, label);
    case LossKind::kFL:
      return std::pow(std::max(1.0 - uy, 0.0), spec.focal_gamma) * ce_term(u, label);
    case LossKind::kGCE: return (1.0 - std::pow(std::max(uy, 0.0), spec.gce_q)) / spec.gce_q;
    case LossKind::kMAE: return 2.0 * (1.0 - uy);
    case LossKind::kRCE: return -spec.rce_a * (1.0 - uy);
    case LossKind::kSCE:
      return spec.alpha * ce_term(u, label) + spec.beta * (-spec.rce_a * (1.0 - uy));
    case LossKind::kNCE: return nce_term(u, label);
    case LossKind::kAPL: return spec.alpha * nce_term(u, label) + spec.beta * 2.0 * (1.0 - uy);
  }
  return 0.0;
}

double lp_penalty(std::span<const double> u, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("lp penalty exponent must lie in (0, 1]");
  double total = 0.0;
  for (double v : u) {
    if (v < 0.0) throw DomainError("lp penalty needs nonnegative entries");
    total += v > 0.0 ? std::pow(v, p) : 0.0;
  }
  return total;
}

double lambda_at(std::size_t epoch, const SRConfig& cfg) {
  const auto steps = static_cast<double>(epoch / cfg.r);
  return cfg.lambda0 * std::pow(cfg.rho, steps);
}

Matrix one_hot(std::span<const std::size_t> labels, std::size_t classes) {
  Matrix out(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw DomainError("label " + std::to_string(labels[i]) + " out of range for " +
                        std::to_string(classes) + " classes");
    }
    out(i, labels[i]) = 1.0;
  }
  return out;
}

NodeId add_loss_rows(GraphBuilder& b, const LossSpec& spec, NodeId probs, NodeId targets) {
  spec.validate();
  const NodeId uy = b.row_sum(b.mul(probs, targets));
  auto ce = [&] { return b.linear(b.log(uy), -1.0, 0.0); };
  auto nce = [&] {
    const NodeId all_ce = b.row_sum(b.linear(b.log(probs), -1.0, 0.0));
    return b.div(ce(), all_ce);
  };
  auto mae = [&] { return b.linear(uy, -2.0, 2.0); };
  auto rce = [&] { return b.linear(uy, spec.rce_a, -spec.rce_a); };

  switch (spec.kind) {
    case LossKind::kCE: return ce();
    case LossKind::kFL: return b.mul(b.pow(b.linear(uy, -1.0, 1.0), spec.focal_gamma), ce());
    case LossKind::kGCE:
      return b.linear(b.pow(uy, spec.gce_q), -1.0 / spec.gce_q, 1.0 / spec.gce_q);
    case LossKind::kMAE: return mae();
    case LossKind::kRCE: return rce();
    case LossKind::kSCE:
      return b.add(b.linear(ce(), spec.alpha, 0.0), b.linear(rce(), spec.beta, 0.0));
    case LossKind::kNCE: return nce();
    case LossKind::kAPL:
      return b.add(b.linear(nce(), spec.alpha, 0.0), b.linear(mae(), spec.beta, 0.0));
  }
  throw DomainError("unhandled loss kind");
}

ObjectiveNodes add_objective(GraphBuilder& b, const LossSpec& spec,
                             const std::optional<SRConfig>& sr, NodeId logits, NodeId targets,
                             NodeId lambda) {
  if (!sr) {
    const NodeId probs = b.softmax(logits, 1.0);
    return {probs, b.mean(add_loss_rows(b, spec, probs, targets))};
  }
  sr->validate();
  const NodeId sharpened_in = sr->l2_normalize_logits ? b.l2_normalize_rows(logits) : logits;
  const NodeId probs = b.softmax(sharpened_in, sr->tau);
  const NodeId loss = add_loss_rows(b, spec, probs, targets);
  const NodeId penalty = b.mul(b.row_sum(b.pow(probs, sr->p)), lambda);
  return {probs, b.mean(b.add(loss, penalty))};
}

ObjectiveValue sr_objective_with_gradient(const LossSpec& spec, const std::optional<SRConfig>& sr,
                                          const Matrix& logits,
                                          std::span<const std::size_t> labels,
                                          std::size_t epoch) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("objective given " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " logit rows");
  }
  GraphBuilder b;
  const NodeId z = b.parameter("logits", logits);
  const NodeId y = b.input("targets", logits.rows(), logits.cols());
  const NodeId lambda = b.input("lambda", 1, 1);
  const ObjectiveNodes nodes = add_objective(b, spec, sr, z, y, lambda);
  const Graph graph = b.build(nodes.objective);

  Inputs inputs;
  inputs.emplace("targets", one_hot(labels, logits.cols()));
  inputs.emplace("lambda", Matrix(1, 1, sr ? lambda_at(epoch, *sr) : 0.0));
  const Tape tape = graph.forward(inputs);
  ObjectiveValue out;
  out.value = tape.output()(0, 0);
  out.logits_gradient = graph.backward(tape).at("logits");
  return out;
}

double sr_objective(const LossSpec& spec, const SRConfig& sr, const Matrix& logits,
                    std::span<const std::size_t> labels, std::size_t epoch) {
  return sr_objective_with_gradient(spec, sr, logits, labels, epoch).value;
}

GradientDecomposition grad_decompose_ce(std::span<const double> logits, std::size_t label,
                                        double tau, double lambda, double p) {
  if (label >= logits.size()) throw DomainError("label out of range in grad_decompose_ce");
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("norm exponent p must lie in (0, 1]");
  const auto s = softmax_tau(logits, tau);
  const Matrix jac = softmax_tau_jacobian(logits, tau);
  const std::size_t k = s.size();

  auto inv_pow = [&](double v) { return std::pow(std::max(v, kProbabilityFloor), p - 1.0); };
  const double inv_sy = s[label] > kProbabilityFloor ? 1.0 / s[label] : 0.0;

  GradientDecomposition out;
  out.fitting_coefficient = inv_sy - lambda * p * inv_pow(s[label]);
  out.fitting.assign(k, 0.0);
  out.complementary.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) out.fitting[c] = -out.fitting_coefficient * jac(label, c);
  for (std::size_t i = 0; i < k; ++i) {
    if (i == label) continue;
    const double weight = lambda * p * inv_pow(s[i]);
    for (std::size_t c = 0; c < k; ++c) out.complementary[c] += weight * jac(i, c);
  }
  return out;
}

}  // namespace sparsereg
