#include "sparsereg/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sparsereg/error.hpp"
#include "sparsereg/primitives.hpp"
#include "sparsereg/random.hpp"

namespace sparsereg {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void check_simplex_vector(std::span<const double> v) {
  if (v.size() < 2) throw DomainError("simplex vector needs at least 2 entries");
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0.0)) throw DomainError("simplex vector has a negative or non-finite entry");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("simplex vector sums to " + fmt(total) + ", expected 1");
  }
}

// Indices whose value is within kRiskTieTolerance of the minimum.
std::vector<std::size_t> argmin_set(const std::vector<double>& values) {
  const double best = *std::min_element(values.begin(), values.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] - best <= kRiskTieTolerance) out.push_back(i);
  }
  return out;
}

void check_instance(const FiniteInstance& inst, std::size_t k) {
  inst.validate();
  if (inst.classes() != k) {
    throw ShapeError("instance has " + std::to_string(inst.classes()) +
                     " classes but v has length " + std::to_string(k));
  }
}

// Per-point loss tables over members: clean[p][m] and noisy[p][m].
struct LossTables {
  std::vector<std::vector<double>> clean;
  std::vector<std::vector<double>> noisy;
};

LossTables build_tables(const LossSpec& spec, const PermutationFamily& family,
                        const FiniteInstance& inst) {
  const std::size_t k = inst.classes();
  // L(member, j) once per member.
  std::vector<std::vector<double>> loss(family.size(), std::vector<double>(k));
  for (std::size_t m = 0; m < family.size(); ++m) {
    for (std::size_t j = 0; j < k; ++j) loss[m][j] = pointwise_loss(spec, family.members[m], j);
  }
  LossTables t;
  for (std::size_t p = 0; p < inst.points(); ++p) {
    const std::size_t y = inst.labels[p];
    std::vector<double> c(family.size()), n(family.size());
    for (std::size_t m = 0; m < family.size(); ++m) {
      c[m] = inst.weights[p] * loss[m][y];
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += inst.transition(y, j) * loss[m][j];
      n[m] = inst.weights[p] * acc;
    }
    t.clean.push_back(std::move(c));
    t.noisy.push_back(std::move(n));
  }
  return t;
}

// Every f: points -> members, point 0 varying fastest.
void enumerate(const LossTables& tables, std::size_t members, RiskReport& report) {
  const std::size_t m = tables.clean.size();
  double count = std::pow(static_cast<double>(members), static_cast<double>(m));
  if (count > static_cast<double>(kMaxEnumeratedHypotheses)) {
    throw DomainError("instance too large to enumerate: " + fmt(count) + " hypotheses (limit " +
                      std::to_string(kMaxEnumeratedHypotheses) + "); reduce points or classes");
  }
  const auto total = static_cast<std::size_t>(count);
  std::vector<std::size_t> digits(m, 0);
  std::vector<double> clean(total), noisy(total);
  report.hypotheses.resize(total);
  for (std::size_t h = 0; h < total; ++h) {
    double c = 0.0, n = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      c += tables.clean[p][digits[p]];
      n += tables.noisy[p][digits[p]];
    }
    clean[h] = c;
    noisy[h] = n;
    report.hypotheses[h] = {h, c, n};
    for (std::size_t p = 0; p < m; ++p) {
      if (++digits[p] < members) break;
      digits[p] = 0;
    }
  }
  report.clean_argmin = argmin_set(clean);
  report.noisy_argmin = argmin_set(noisy);
}

void note_clamp(const LossSpec& spec, std::span<const double> v, RiskReport& report) {
  const bool uses_log = spec.kind == LossKind::kCE || spec.kind == LossKind::kFL ||
                        spec.kind == LossKind::kSCE || spec.kind == LossKind::kNCE ||
                        spec.kind == LossKind::kAPL;
  const bool has_zero = std::any_of(v.begin(), v.end(), [](double x) { return x < kProbabilityFloor; });
  if (uses_log && has_zero) {
    report.notes.push_back("log clamped at " + fmt(kProbabilityFloor) +
                           "; C is finite only because of the clamp");
  }
}

std::vector<double> random_direction(std::size_t k, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> d(k);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : d) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
  } while (norm < 1e-12);
  for (double& x : d) x /= norm;
  return d;
}

// Uniformly random member of P_v without enumerating the family.
std::vector<double> random_member(std::span<const double> v, Rng& rng) {
  std::vector<double> u(v.begin(), v.end());
  std::shuffle(u.begin(), u.end(), rng);
  return u;
}

std::vector<double> perturb(std::span<const double> base, std::span<const double> dir, double r) {
  std::vector<double> x(base.begin(), base.end());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += r * dir[i];
  return project_to_simplex(x);
}

}  // namespace

PermutationFamily permutations_of(std::span<const double> v) {
  if (v.size() > kMaxPermutationClasses) {
    throw DomainError("cannot enumerate " + std::to_string(v.size()) +
                      "! permutations (limit k = " + std::to_string(kMaxPermutationClasses) +
                      "); use the sampled risk-bound check instead");
  }
  if (v.empty()) throw DomainError("permutations_of needs a non-empty vector");
  PermutationFamily family;
  family.base.assign(v.begin(), v.end());
  std::vector<std::size_t> pi(v.size());
  std::iota(pi.begin(), pi.end(), std::size_t{0});
  do {
    std::vector<double> member(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) member[i] = v[pi[i]];
    family.permutations.push_back(pi);
    family.members.push_back(std::move(member));
  } while (std::next_permutation(pi.begin(), pi.end()));
  return family;
}

double loss_sum_over_classes(const LossSpec& spec, std::span<const double> u) {
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) total += pointwise_loss(spec, u, i);
  return total;
}

SymmetricConditionResult check_symmetric_condition(const LossSpec& spec,
                                                   std::span<const double> v, double tolerance) {
  const PermutationFamily family = permutations_of(v);
  SymmetricConditionResult out;
  out.total = loss_sum_over_classes(spec, v);
  for (const auto& member : family.members) {
    out.max_deviation =
        std::max(out.max_deviation, std::abs(loss_sum_over_classes(spec, member) - out.total));
  }
  out.constant = out.max_deviation <= tolerance;
  return out;
}

void FiniteInstance::validate() const {
  if (weights.size() != labels.size()) {
    throw ShapeError("instance has " + std::to_string(weights.size()) + " weights and " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DomainError("instance has no points");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("instance weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("instance weights sum to " + fmt(total) + ", expected 1");
  }
  for (std::size_t y : labels) {
    if (y >= classes()) {
      throw DomainError("instance label " + std::to_string(y) + " outside [0, " +
                        std::to_string(classes()) + ")");
    }
  }
}

FiniteInstance random_instance(std::size_t points, const TransitionMatrix& transition,
                               std::uint64_t seed) {
  if (points == 0) throw DomainError("instance needs at least one point");
  Rng rng = make_rng({seed, 0x696e7374ULL});
  std::uniform_real_distribution<double> wdist(0.1, 1.0);
  std::uniform_int_distribution<std::size_t> ldist(0, transition.classes() - 1);
  FiniteInstance inst;
  inst.transition = transition;
  double total = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    inst.weights.push_back(wdist(rng));
    total += inst.weights.back();
    inst.labels.push_back(ldist(rng));
  }
  for (double& w : inst.weights) w /= total;
  return inst;
}

double clean_risk(const LossSpec& spec, const Hypothesis& h, const FiniteInstance& inst) {
  if (h.size() != inst.points()) {
    throw ShapeError("hypothesis assigns " + std::to_string(h.size()) + " outputs for " +
                     std::to_string(inst.points()) + " points");
  }
  double risk = 0.0;
  for (std::size_t p = 0; p < h.size(); ++p) {
    risk += inst.weights[p] * pointwise_loss(spec, h[p], inst.labels[p]);
  }
  return risk;
}

double noisy_risk(const LossSpec& spec, const Hypothesis& h, const FiniteInstance& inst) {
  if (h.size() != inst.points()) {
    throw ShapeError("hypothesis assigns " + std::to_string(h.size()) + " outputs for " +
                     std::to_string(inst.points()) + " points");
  }
  const std::size_t k = inst.classes();
  double risk = 0.0;
  for (std::size_t p = 0; p < h.size(); ++p) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double t = inst.transition(inst.labels[p], j);
      if (t != 0.0) acc += t * pointwise_loss(spec, h[p], j);
    }
    risk += inst.weights[p] * acc;
  }
  return risk;
}

std::vector<double> project_to_simplex(std::span<const double> x) {
  if (x.empty()) return {};
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(x[i] - theta, 0.0);
  return out;
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kHolds: return "holds";
    case Verdict::kFails: return "fails";
    case Verdict::kPreconditionsViolated: return "preconditions violated";
  }
  return "unknown";
}

RiskReport verify_theorem1(const LossSpec& spec, std::span<const double> v,
                           const FiniteInstance& inst) {
  check_simplex_vector(v);
  check_instance(inst, v.size());
  const auto eta = inst.transition.symmetric_rate();
  if (!eta) throw DomainError("theorem1 needs a symmetric transition matrix");
  const std::size_t k = v.size();

  RiskReport report;
  report.check = "theorem1";
  report.eta = *eta;
  report.noise_bound_holds = *eta < 1.0 - 1.0 / static_cast<double>(k);
  report.total_loss = loss_sum_over_classes(spec, v);
  note_clamp(spec, v, report);
  if (!report.noise_bound_holds) {
    report.notes.push_back("eta = " + fmt(*eta) + " is not below 1 - 1/k; result recorded only");
  }

  const PermutationFamily family = permutations_of(v);
  enumerate(build_tables(spec, family, inst), family.size(), report);
  report.verdict =
      report.clean_argmin == report.noisy_argmin ? Verdict::kHolds : Verdict::kFails;
  return report;
}

RiskReport verify_theorem2(const LossSpec& spec, std::span<const double> v,
                           const FiniteInstance& inst) {
  check_simplex_vector(v);
  check_instance(inst, v.size());
  const std::size_t k = v.size();
  const TransitionMatrix& t = inst.transition;

  RiskReport report;
  report.check = "theorem2";
  const double c_total = loss_sum_over_classes(spec, v);
  report.total_loss = c_total;
  note_clamp(spec, v, report);

  bool rows_ok = true;
  for (std::size_t y = 0; y < k; ++y) {
    report.eta = std::max(report.eta, t.flip_rate(y));
    for (std::size_t i = 0; i < k; ++i) {
      if (i != y && !(t(y, i) < 1.0 - t.flip_rate(y))) {
        rows_ok = false;
        report.notes.push_back("row " + std::to_string(y) + ": T(" + std::to_string(y) + "," +
                               std::to_string(i) + ") = " + fmt(t(y, i)) +
                               " is not below 1 - eta_y = " + fmt(1.0 - t.flip_rate(y)));
      }
    }
  }
  report.noise_bound_holds = rows_ok;

  const PermutationFamily family = permutations_of(v);
  const double upper = c_total / static_cast<double>(k - 1);
  bool range_ok = true;
  for (const auto& member : family.members) {
    for (std::size_t i = 0; i < k && range_ok; ++i) {
      const double l = pointwise_loss(spec, member, i);
      if (l < -kRiskTieTolerance || l > upper + kRiskTieTolerance) {
        range_ok = false;
        report.notes.push_back("loss value " + fmt(l) + " outside [0, C/(k-1)] = [0, " +
                               fmt(upper) + "]");
      }
    }
  }

  enumerate(build_tables(spec, family, inst), family.size(), report);
  const double min_clean = report.hypotheses[report.clean_argmin.front()].clean;
  const bool zero_ok = std::abs(min_clean) <= kRiskTieTolerance;
  if (!zero_ok) {
    report.notes.push_back("minimum clean risk is " + fmt(min_clean) + ", not 0");
  }

  if (!(rows_ok && range_ok && zero_ok)) {
    report.verdict = Verdict::kPreconditionsViolated;
    return report;
  }
  const bool subset = std::includes(report.clean_argmin.begin(), report.clean_argmin.end(),
                                    report.noisy_argmin.begin(), report.noisy_argmin.end());
  report.verdict = subset ? Verdict::kHolds : Verdict::kFails;
  return report;
}

double estimate_delta(const LossSpec& spec, std::span<const double> v, double epsilon,
                      std::size_t samples, std::uint64_t seed) {
  check_simplex_vector(v);
  if (!(epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
  if (epsilon == 0.0) return 0.0;
  const std::size_t k = v.size();
  const double c_total = loss_sum_over_classes(spec, v);

  Rng rng = make_rng({seed, 0x64656c7461ULL});
  const double log_lo = std::log(1e-6);
  const double log_hi = std::log(std::sqrt(2.0));
  double delta = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    // Draw every component regardless of epsilon so the pool is shared.
    const std::vector<double> u1 = random_member(v, rng);
    const std::vector<double> dir = random_direction(k, rng);
    const double r = std::exp(log_lo + (log_hi - log_lo) * uniform01(rng));
    if (r > epsilon) continue;
    const std::vector<double> u2 = perturb(u1, dir, r);
    delta = std::max(delta, std::abs(loss_sum_over_classes(spec, u2) - c_total));
  }
  return delta;
}

RiskReport verify_risk_bound(const LossSpec& spec, std::span<const double> v, double epsilon,
                             const FiniteInstance& inst, std::uint64_t seed,
                             const RiskBoundOptions& options) {
  check_simplex_vector(v);
  check_instance(inst, v.size());
  if (!(epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
  if (options.hypotheses == 0) throw DomainError("risk bound needs at least one hypothesis");
  const auto eta = inst.transition.symmetric_rate();
  if (!eta) throw DomainError("theorem3 needs a symmetric transition matrix");
  const std::size_t k = v.size();
  const double kd = static_cast<double>(k);
  if (!(*eta < 1.0 - 1.0 / kd)) {
    throw DomainError("theorem3 needs eta < 1 - 1/k (got " + fmt(*eta) + ")");
  }

  RiskReport report;
  report.check = "theorem3";
  report.eta = *eta;
  report.noise_bound_holds = true;
  report.epsilon = epsilon;
  const double c_total = loss_sum_over_classes(spec, v);
  report.total_loss = c_total;
  report.bound_constant = *eta / ((1.0 - *eta) * kd - 1.0);
  note_clamp(spec, v, report);

  Rng rng = make_rng({seed, 0x68797073ULL});
  std::vector<double> clean(options.hypotheses), noisy(options.hypotheses);
  double realized = 0.0;
  for (std::size_t h = 0; h < options.hypotheses; ++h) {
    Hypothesis f;
    for (std::size_t p = 0; p < inst.points(); ++p) {
      const std::vector<double> u1 = random_member(v, rng);
      const std::vector<double> dir = random_direction(k, rng);
      // Uniform in the ball: radius eps * U^(1/k).
      const double r = epsilon * std::pow(uniform01(rng), 1.0 / kd);
      f.push_back(perturb(u1, dir, r));
      realized = std::max(realized, std::abs(loss_sum_over_classes(spec, f.back()) - c_total));
    }
    clean[h] = clean_risk(spec, f, inst);
    noisy[h] = noisy_risk(spec, f, inst);
    report.hypotheses.push_back({h, clean[h], noisy[h]});
  }
  report.clean_argmin = argmin_set(clean);
  report.noisy_argmin = argmin_set(noisy);

  report.delta_sampled = estimate_delta(spec, v, epsilon, options.delta_samples, seed);
  report.delta_realized = realized;
  report.delta = std::max(*report.delta_sampled, realized);
  report.bound = 2.0 * *report.bound_constant * *report.delta;
  report.notes.push_back("delta is a sampled estimate; the bound check is empirical");

  // Worst clean risk among tied noisy minimizers.
  double noisy_min_clean = clean[report.noisy_argmin.front()];
  for (std::size_t i : report.noisy_argmin) noisy_min_clean = std::max(noisy_min_clean, clean[i]);
  report.risk_gap = noisy_min_clean - clean[report.clean_argmin.front()];
  report.verdict =
      *report.risk_gap <= *report.bound + kRiskBoundSlack ? Verdict::kHolds : Verdict::kFails;
  return report;
}

std::string format_report(const RiskReport& report) {
  std::ostringstream out;
  out << report.check << ": " << to_string(report.verdict) << "\n";
  out << "  hypotheses: " << report.hypotheses.size() << "\n";
  out << "  eta: " << fmt(report.eta)
      << (report.noise_bound_holds ? " (noise bound holds)" : " (noise bound violated)") << "\n";
  auto opt_line = [&](const char* name, const std::optional<double>& x) {
    if (x) out << "  " << name << ": " << fmt(*x) << "\n";
  };
  opt_line("C", report.total_loss);
  opt_line("c", report.bound_constant);
  opt_line("epsilon", report.epsilon);
  opt_line("delta (sampled estimate)", report.delta_sampled);
  opt_line("delta (realized on sample)", report.delta_realized);
  opt_line("delta", report.delta);
  opt_line("risk gap", report.risk_gap);
  opt_line("bound 2 c delta", report.bound);
  out << "  clean argmin size: " << report.clean_argmin.size() << "\n";
  out << "  noisy argmin size: " << report.noisy_argmin.size() << "\n";
  for (const auto& note : report.notes) out << "  note: " << note << "\n";
  return out.str();
}

void write_report_csv(const RiskReport& report, std::ostream& out) {
  out << "hypothesis,clean_risk,noisy_risk,flags\n";
  std::size_t ci = 0, ni = 0;
  for (const auto& h : report.hypotheses) {
    while (ci < report.clean_argmin.size() && report.clean_argmin[ci] < h.index) ++ci;
    while (ni < report.noisy_argmin.size() && report.noisy_argmin[ni] < h.index) ++ni;
    const bool in_clean = ci < report.clean_argmin.size() && report.clean_argmin[ci] == h.index;
    const bool in_noisy = ni < report.noisy_argmin.size() && report.noisy_argmin[ni] == h.index;
    std::string flags;
    if (in_clean) flags = "clean_min";
    if (in_noisy) flags += flags.empty() ? "noisy_min" : "|noisy_min";
    out << h.index << ',' << fmt(h.clean) << ',' << fmt(h.noisy) << ',' << flags << '\n';
  }
}

}  // namespace sparsereg
