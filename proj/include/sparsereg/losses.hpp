#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparsereg/autodiff.hpp"
#include "sparsereg/matrix.hpp"

namespace sparsereg {

enum class LossKind { kCE, kFL, kGCE, kMAE, kRCE, kSCE, kNCE, kAPL };

inline constexpr LossKind kAllLossKinds[] = {LossKind::kCE,  LossKind::kFL,  LossKind::kGCE,
                                             LossKind::kMAE, LossKind::kRCE, LossKind::kSCE,
                                             LossKind::kNCE, LossKind::kAPL};

std::string_view to_string(LossKind kind);
// Case-insensitive ("ce", "GCE", ...). Throws FormatError on unknown names.
LossKind parse_loss_kind(std::string_view name);

// Benchmarks whose published hyper-parameters we ship as presets.
enum class Benchmark { kMnist, kCifar10, kCifar100, kWebVision };

std::string_view to_string(Benchmark benchmark);
Benchmark parse_benchmark(std::string_view name);

// A pointwise loss L(u, y) over the probability simplex.
//   CE  = -log u_y                       FL  = -(1 - u_y)^gamma log u_y
//   GCE = (1 - u_y^q) / q                MAE = 2 (1 - u_y)
//   RCE = -A (1 - u_y)                   SCE = alpha CE + beta RCE
//   NCE = CE(u, y) / sum_j CE(u, j)      APL = alpha NCE + beta MAE
// Logs are floored at kProbabilityFloor.
struct LossSpec {
  LossKind kind = LossKind::kCE;
  double focal_gamma = 0.3;
  double gce_q = 0.7;
  double rce_a = -3.0;
  double alpha = 1.0;
  double beta = 1.0;

  // Throws DomainError when a parameter is outside its range.
  void validate() const;

  static LossSpec of(LossKind kind);
  static LossSpec sce(Benchmark benchmark);
  static LossSpec apl(Benchmark benchmark);

  bool operator==(const LossSpec&) const = default;
};

// Sparse regularization: sharpened outputs softmax(z_hat / tau) plus
// lambda_t * ||u||_p^p with lambda_t = lambda0 * rho^floor(t / r).
struct SRConfig {
  double tau = 1.0;
  double p = 1.0;
  double lambda0 = 0.0;
  double rho = 1.0;
  std::size_t r = 1;
  bool l2_normalize_logits = true;

  void validate() const;

  // (tau, p, lambda0, rho, r) as published for each benchmark.
  static SRConfig preset(Benchmark benchmark, bool symmetric_noise = true);

  bool operator==(const SRConfig&) const = default;
};

double pointwise_loss(const LossSpec& spec, std::span<const double> u, std::size_t label);

// sum_i u_i^p with 0^p = 0. Throws DomainError unless p is in (0, 1].
double lp_penalty(std::span<const double> u, double p);

double lambda_at(std::size_t epoch, const SRConfig& cfg);

Matrix one_hot(std::span<const std::size_t> labels, std::size_t classes);

// Graph fragments --------------------------------------------------------

// Per-row loss (N x 1) for probabilities `probs` (N x k) and one-hot
// `targets` (N x k).
NodeId add_loss_rows(GraphBuilder& builder, const LossSpec& spec, NodeId probs, NodeId targets);

struct ObjectiveNodes {
  NodeId probs;      // sharpened outputs, N x k
  NodeId objective;  // batch mean, 1 x 1
};

// mean_i [ L(u_i, y_i) + lambda * ||u_i||_p^p ] with u_i = softmax(z_hat_i / tau).
// `lambda` is a 1x1 node so the schedule can change without rebuilding.
// Without SR the objective is the plain loss on softmax(z).
ObjectiveNodes add_objective(GraphBuilder& builder, const LossSpec& spec,
                             const std::optional<SRConfig>& sr, NodeId logits, NodeId targets,
                             NodeId lambda);

struct ObjectiveValue {
  double value = 0.0;
  Matrix logits_gradient;
};

// Objective at epoch t (lambda from lambda_at) and its gradient w.r.t. logits.
ObjectiveValue sr_objective_with_gradient(const LossSpec& spec, const std::optional<SRConfig>& sr,
                                          const Matrix& logits,
                                          std::span<const std::size_t> labels, std::size_t epoch);

double sr_objective(const LossSpec& spec, const SRConfig& sr, const Matrix& logits,
                    std::span<const std::size_t> labels, std::size_t epoch);

// Gradient of -log s_y + lambda ||s||_p^p (s = softmax_tau(z)) split into the
// part that pulls s_y up and the part that suppresses the other classes.
struct GradientDecomposition {
  std::vector<double> fitting;
  std::vector<double> complementary;
  double fitting_coefficient = 0.0;  // 1/s_y - lambda p / s_y^(1-p)
};

GradientDecomposition grad_decompose_ce(std::span<const double> logits, std::size_t label,
                                        double tau, double lambda, double p);

}  // namespace sparsereg
