#include "sparsereg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sparsereg/error.hpp"
#include "sparsereg/losses.hpp"
#include "sparsereg/primitives.hpp"
#include "sparsereg/random.hpp"
#include "sparsereg/theory.hpp"
#include "sparsereg/trainer.hpp"

namespace sparsereg {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(k);
  double total = 0.0;
  for (double& x : v) {
    x = e(rng) + 1e-3;
    total += x;
  }
  for (double& x : v) x /= total;
  return v;
}

std::string report_detail(const RiskReport& r) {
  std::string s = std::string(to_string(r.verdict)) + ", " + std::to_string(r.hypotheses.size()) +
                  " hypotheses";
  if (r.total_loss) s += ", C=" + fmt(*r.total_loss);
  if (r.bound_constant) s += ", c=" + fmt(*r.bound_constant);
  if (r.delta) s += ", delta=" + fmt(*r.delta);
  if (r.risk_gap) s += ", gap=" + fmt(*r.risk_gap);
  if (r.bound) s += ", bound=" + fmt(*r.bound);
  return s;
}

std::vector<std::size_t> pick(const std::optional<std::size_t>& one,
                              std::vector<std::size_t> defaults) {
  return one ? std::vector<std::size_t>{*one} : defaults;
}

std::vector<double> pick(const std::optional<double>& one, std::vector<double> defaults) {
  return one ? std::vector<double>{*one} : defaults;
}

std::vector<CheckResult> lemma1(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  Rng rng = make_rng({o.seed, 0x6c656d6d61ULL});
  for (std::size_t k : pick(o.classes, {3, 4, 5})) {
    for (LossKind kind : kAllLossKinds) {
      const LossSpec spec = LossSpec::of(kind);
      double worst = 0.0;
      for (int trial = 0; trial < 100; ++trial) {
        const auto v = random_simplex(k, rng);
        worst = std::max(worst, check_symmetric_condition(spec, v).max_deviation);
      }
      out.push_back({"lemma1 " + std::string(to_string(kind)) + " k=" + std::to_string(k),
                     worst <= 1e-12, true, "max deviation " + fmt(worst)});
    }
  }
  const LossSpec ce = LossSpec::of(LossKind::kCE);
  const std::vector<double> a = {0.9, 0.05, 0.05}, b = {0.5, 0.3, 0.2};
  const double gap = std::abs(loss_sum_over_classes(ce, a) - loss_sum_over_classes(ce, b));
  out.push_back({"lemma1 negative control", gap > 1e-6, true, "non-permutation gap " + fmt(gap)});
  return out;
}

std::vector<CheckResult> theorem1(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  Rng rng = make_rng({o.seed, 0x7468316dULL});
  const LossKind kinds[] = {LossKind::kCE, LossKind::kFL, LossKind::kGCE, LossKind::kMAE};
  for (std::size_t k : pick(o.classes, {3, 4})) {
    for (std::size_t m : pick(o.points, {2, 3})) {
      for (double eta : pick(o.eta, {0.2, 0.4, 0.6})) {
        const bool in_bound = eta < 1.0 - 1.0 / static_cast<double>(k);
        if (!in_bound && !o.eta) continue;
        const auto inst = random_instance(m, symmetric_transition(k, eta), rng());
        const auto v = random_simplex(k, rng);
        for (LossKind kind : kinds) {
          const RiskReport r = verify_theorem1(LossSpec::of(kind), v, inst);
          out.push_back({"theorem1 " + std::string(to_string(kind)) + " k=" + std::to_string(k) +
                             " m=" + std::to_string(m) + " eta=" + fmt(eta),
                         r.holds(), in_bound, report_detail(r)});
        }
      }
    }
  }
  return out;
}

// 0->1 then swaps 2<->3, 4<->5, ...
FlipMap pairwise_map(std::size_t k) {
  FlipMap map = {{0, 1}};
  for (std::size_t a = 2; a + 1 < k; a += 2) {
    map.emplace_back(a, a + 1);
    map.emplace_back(a + 1, a);
  }
  return map;
}

std::vector<CheckResult> theorem2(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  Rng rng = make_rng({o.seed, 0x7468326dULL});
  const std::size_t m = o.points.value_or(3);
  for (std::size_t k : pick(o.classes, {3, 4})) {
    std::vector<double> one_hot(k, 0.0);
    one_hot[0] = 1.0;
    for (double eta : pick(o.eta, {0.2, 0.3, 0.4})) {
      const auto t = asymmetric_transition(pairwise_map(k), k, eta);
      const auto inst = random_instance(m, t, rng());
      for (LossKind kind : {LossKind::kMAE, LossKind::kCE}) {
        const RiskReport r = verify_theorem2(LossSpec::of(kind), one_hot, inst);
        out.push_back({"theorem2 " + std::string(to_string(kind)) + " one-hot k=" +
                           std::to_string(k) + " m=" + std::to_string(m) + " eta=" + fmt(eta),
                       r.holds(), true, report_detail(r)});
      }
    }
    // CE off one-hot cannot reach zero clean risk.
    const auto inst = random_instance(m, asymmetric_transition(pairwise_map(k), k, 0.3), rng());
    const RiskReport r = verify_theorem2(LossSpec::of(LossKind::kCE), random_simplex(k, rng), inst);
    out.push_back({"theorem2 ce non-one-hot k=" + std::to_string(k) + " flags preconditions",
                   r.verdict == Verdict::kPreconditionsViolated, true, report_detail(r)});
  }
  return out;
}

std::vector<CheckResult> theorem3(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  const std::size_t k = o.classes.value_or(3);
  const std::size_t m = o.points.value_or(2);
  const double eta = o.eta.value_or(0.5);
  const bool in_bound = eta < 1.0 - 1.0 / static_cast<double>(k);
  if (!in_bound) {
    out.push_back({"theorem3 eta=" + fmt(eta) + " k=" + std::to_string(k), false, false,
                   "eta is not below 1 - 1/k; bound undefined"});
    return out;
  }
  std::vector<double> v(k, 0.2 / static_cast<double>(k - 1));
  v[0] = 0.8;
  const auto inst = random_instance(m, symmetric_transition(k, eta), o.seed);
  for (LossKind kind : {LossKind::kCE, LossKind::kMAE}) {
    for (double eps : {0.0, 0.01, 0.05}) {
      const RiskReport r = verify_risk_bound(LossSpec::of(kind), v, eps, inst, o.seed);
      out.push_back({"theorem3 " + std::string(to_string(kind)) + " k=" + std::to_string(k) +
                         " eps=" + fmt(eps) + " eta=" + fmt(eta),
                     r.holds(), true, report_detail(r)});
    }
  }
  return out;
}

std::vector<CheckResult> gradients(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  for (LossKind kind : kAllLossKinds) {
    for (bool sr : {false, true}) {
      const double worst = worst_gradient_error(to_string(kind), sr, 100, o.seed);
      out.push_back({"gradients " + std::string(to_string(kind)) + (sr ? " +sr" : ""),
                     worst < 1e-5, true, "max relative error " + fmt(worst)});
    }
  }
  return out;
}

}  // namespace

double worst_gradient_error(std::string_view loss_kind, bool with_sr, std::size_t points,
                            std::uint64_t seed) {
  constexpr std::size_t kDim = 3, kHidden = 4, kClasses = 3, kBatch = 4;
  const LossSpec spec = LossSpec::of(parse_loss_kind(loss_kind));
  Rng rng = make_rng({seed, 0x67726164ULL, static_cast<std::uint64_t>(spec.kind), with_sr});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double worst = 0.0;
  for (std::size_t point = 0; point < points; ++point) {
    Mlp model = init_mlp({{kDim, kHidden, kClasses}, Activation::kRelu, rng()});
    Matrix x(kBatch, kDim);
    for (double& v : x.values()) v = normal(rng);
    for (auto& layer : model.layers) {
      for (double& v : layer.bias.values()) v = 0.5 * normal(rng);
    }
    // Keep ReLU inputs away from the kink so central differences are smooth.
    const Matrix pre = matmul(x, model.layers[0].weight);
    bool near_kink = false;
    for (std::size_t r = 0; r < pre.rows(); ++r) {
      for (std::size_t c = 0; c < pre.cols(); ++c) {
        if (std::abs(pre(r, c) + model.layers[0].bias(0, c)) < 1e-3) near_kink = true;
      }
    }
    if (near_kink) {
      --point;
      continue;
    }
    std::vector<std::size_t> labels(kBatch);
    for (auto& y : labels) y = static_cast<std::size_t>(rng() % kClasses);

    std::optional<SRConfig> sr;
    double lambda = 0.0;
    if (with_sr) {
      sr = SRConfig{0.3 + 0.7 * unit(rng), 0.1 + 0.9 * unit(rng), 0.0, 1.0, 1, true};
      lambda = 0.1 + 1.9 * unit(rng);
    }

    GraphBuilder b;
    const NodeId xin = b.input("x", kDim);
    const NodeId targets = b.input("targets", kClasses);
    const NodeId lam = b.input("lambda", 1, 1);
    const NodeId logits = add_mlp(b, model, xin);
    Graph g = b.build(add_objective(b, spec, sr, logits, targets, lam).objective);
    Inputs inputs;
    inputs.emplace("x", x);
    inputs.emplace("targets", one_hot(labels, kClasses));
    inputs.emplace("lambda", Matrix(1, 1, lambda));

    const GradientSet grads = g.backward(g.forward(inputs));
    const auto names = g.parameter_names();
    std::vector<double> flat, analytic;
    for (const auto& name : names) {
      const auto values = g.parameter(name).values();
      flat.insert(flat.end(), values.begin(), values.end());
      const auto gv = grads.at(name).values();
      analytic.insert(analytic.end(), gv.begin(), gv.end());
    }
    auto objective = [&](std::span<const double> theta) {
      std::size_t offset = 0;
      for (const auto& name : names) {
        auto values = g.parameter(name).values();
        std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(offset), values.size(),
                    values.begin());
        offset += values.size();
      }
      return g.evaluate(inputs)(0, 0);
    };
    const auto numeric = finite_diff_gradient(objective, flat, 1e-5);
    worst = std::max(worst, relative_error(analytic, numeric, 1e-8));
  }
  return worst;
}

std::vector<CheckResult> run_verify_suite(std::string_view suite, const VerifyOptions& options) {
  if (suite == "lemma1") return lemma1(options);
  if (suite == "theorem1") return theorem1(options);
  if (suite == "theorem2") return theorem2(options);
  if (suite == "theorem3") return theorem3(options);
  if (suite == "gradients") return gradients(options);
  if (suite == "all") {
    std::vector<CheckResult> all;
    for (std::string_view name : kVerifySuites) {
      if (name == "all") continue;
      auto part = run_verify_suite(name, options);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  std::string names;
  for (std::string_view name : kVerifySuites) names += (names.empty() ? "" : ", ") + std::string(name);
  throw DomainError("unknown suite '" + std::string(suite) + "' (expected one of: " + names + ")");
}

}  // namespace sparsereg
