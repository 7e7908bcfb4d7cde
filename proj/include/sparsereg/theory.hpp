#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sparsereg/losses.hpp"
#include "sparsereg/noise.hpp"

namespace sparsereg {

// Enumeration is capped at k = 8 (8! = 40320 members).
inline constexpr std::size_t kMaxPermutationClasses = 8;
// Exhaustive hypothesis enumeration refuses classes larger than this.
inline constexpr std::size_t kMaxEnumeratedHypotheses = 5'000'000;
// Risks closer than this are treated as ties when forming argmin sets.
inline constexpr double kRiskTieTolerance = 1e-12;
// Slack added to the sampled risk-bound comparison.
inline constexpr double kRiskBoundSlack = 1e-9;

// All k! reorderings P_pi v of a base vector, in lexicographic order of pi.
// Tied entries produce repeated members; they are kept so size() == k!.
struct PermutationFamily {
  std::vector<double> base;
  std::vector<std::vector<std::size_t>> permutations;  // pi, 0-based
  std::vector<std::vector<double>> members;            // members[m][i] = base[pi_m[i]]

  std::size_t size() const noexcept { return members.size(); }
};

PermutationFamily permutations_of(std::span<const double> v);

// sum_i L(u, i).
double loss_sum_over_classes(const LossSpec& spec, std::span<const double> u);

struct SymmetricConditionResult {
  bool constant = false;
  double total = 0.0;          // C = sum_i L(v, i)
  double max_deviation = 0.0;  // max over members of |sum_i L(u, i) - C|
};

SymmetricConditionResult check_symmetric_condition(const LossSpec& spec,
                                                   std::span<const double> v,
                                                   double tolerance = 1e-12);

// Discrete distribution over m points with clean labels and a noise model.
struct FiniteInstance {
  std::vector<double> weights;
  std::vector<std::size_t> labels;
  TransitionMatrix transition = TransitionMatrix::identity(2);

  std::size_t points() const noexcept { return labels.size(); }
  std::size_t classes() const noexcept { return transition.classes(); }
  // Throws DomainError on negative weights, weights not summing to 1, or
  // out-of-range labels.
  void validate() const;
};

// Weights uniform on [0.1, 1] then normalized; labels uniform over classes.
FiniteInstance random_instance(std::size_t points, const TransitionMatrix& transition,
                               std::uint64_t seed);

// Output vector assigned to each point of an instance.
using Hypothesis = std::vector<std::vector<double>>;

double clean_risk(const LossSpec& spec, const Hypothesis& h, const FiniteInstance& inst);
// sum_x w_x sum_j T(y_x, j) L(h(x), j)
double noisy_risk(const LossSpec& spec, const Hypothesis& h, const FiniteInstance& inst);

// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> x);

enum class Verdict { kHolds, kFails, kPreconditionsViolated };

std::string_view to_string(Verdict verdict);

struct HypothesisRisk {
  std::size_t index = 0;
  double clean = 0.0;
  double noisy = 0.0;
};

struct RiskReport {
  std::string check;
  Verdict verdict = Verdict::kFails;
  std::vector<HypothesisRisk> hypotheses;
  std::vector<std::size_t> clean_argmin;
  std::vector<std::size_t> noisy_argmin;
  double eta = 0.0;
  bool noise_bound_holds = false;  // eta < 1 - 1/k (or the per-row analogue)
  std::optional<double> total_loss;       // C
  std::optional<double> bound_constant;   // c = eta / ((1 - eta) k - 1)
  std::optional<double> delta;            // used in the bound
  std::optional<double> delta_sampled;    // estimate_delta
  std::optional<double> delta_realized;   // max deviation over the sampled class
  std::optional<double> epsilon;
  std::optional<double> risk_gap;         // R(f*_eta) - R(f*)
  std::optional<double> bound;            // 2 c delta
  std::vector<std::string> notes;

  bool holds() const noexcept { return verdict == Verdict::kHolds; }
};

// Exhaustive check over every f: points -> P_v that the clean and noisy
// argmin sets coincide. Requires a symmetric transition matrix.
RiskReport verify_theorem1(const LossSpec& spec, std::span<const double> v,
                           const FiniteInstance& inst);

// Exhaustive check that every noisy-risk minimizer is a clean-risk minimizer
// under class-conditional noise. Reports kPreconditionsViolated when the
// per-row noise bound, 0 <= L <= C/(k-1) on P_v, or min clean risk = 0 fails.
RiskReport verify_theorem2(const LossSpec& spec, std::span<const double> v,
                           const FiniteInstance& inst);

// Largest |sum_i L(u2, i) - sum_i L(u1, i)| over sampled pairs with u1 in P_v
// and u2 the simplex projection of u1 + r d, r <= epsilon. The candidate pool
// (member, direction, log-uniform radius) depends only on the seed, so the
// estimate is nondecreasing in epsilon.
double estimate_delta(const LossSpec& spec, std::span<const double> v, double epsilon,
                      std::size_t samples, std::uint64_t seed);

struct RiskBoundOptions {
  std::size_t hypotheses = 2000;
  std::size_t delta_samples = 20000;
};

// Samples hypotheses from H_{v, epsilon} (each point gets a member of P_v
// plus a projected perturbation drawn uniformly from the epsilon ball) and
// checks R(f*_eta) - R(f*) <= 2 c delta + kRiskBoundSlack over the sample.
RiskReport verify_risk_bound(const LossSpec& spec, std::span<const double> v, double epsilon,
                             const FiniteInstance& inst, std::uint64_t seed,
                             const RiskBoundOptions& options = {});

// Human-readable summary (no per-hypothesis rows).
std::string format_report(const RiskReport& report);

// hypothesis,clean_risk,noisy_risk,flags
void write_report_csv(const RiskReport& report, std::ostream& out);

}  // namespace sparsereg
