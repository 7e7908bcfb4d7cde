#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sparsereg/error.hpp"
#include "sparsereg/theory.hpp"

using namespace sparsereg;

namespace {

// Independent loss oracles.
double ce(const std::vector<double>& u, std::size_t y) { return -std::log(std::max(u[y], 1e-7)); }
double mae(const std::vector<double>& u, std::size_t y) { return 2.0 * (1.0 - u[y]); }

std::vector<std::vector<double>> all_orderings(std::vector<double> v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<std::vector<double>> out;
  do {
    std::vector<double> m;
    for (std::size_t i : idx) m.push_back(v[i]);
    out.push_back(m);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return out;
}

// Brute-force argmin sets over f: points -> orderings, point 0 fastest.
template <typename Loss>
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> oracle_argmins(
    Loss loss, const std::vector<double>& v, const FiniteInstance& inst) {
  const auto members = all_orderings(v);
  const std::size_t k = v.size(), n = members.size(), m = inst.points();
  std::size_t total = 1;
  for (std::size_t p = 0; p < m; ++p) total *= n;
  std::vector<double> clean(total), noisy(total);
  for (std::size_t h = 0; h < total; ++h) {
    std::size_t code = h;
    for (std::size_t p = 0; p < m; ++p) {
      const auto& u = members[code % n];
      code /= n;
      const std::size_t y = inst.labels[p];
      clean[h] += inst.weights[p] * loss(u, y);
      for (std::size_t j = 0; j < k; ++j) noisy[h] += inst.weights[p] * inst.transition(y, j) * loss(u, j);
    }
  }
  const auto argmin = [](const std::vector<double>& r) {
    const double best = *std::min_element(r.begin(), r.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (r[i] - best <= 1e-12) out.push_back(i);
    return out;
  };
  return {argmin(clean), argmin(noisy)};
}

FiniteInstance instance(std::vector<double> w, std::vector<std::size_t> y, TransitionMatrix t) {
  FiniteInstance inst;
  inst.weights = std::move(w);
  inst.labels = std::move(y);
  inst.transition = std::move(t);
  return inst;
}

}  // namespace

TEST_CASE("permutation family") {
  const std::vector<double> v = {0.7, 0.2, 0.1};
  const auto fam = permutations_of(v);
  CHECK(fam.size() == 6);
  // pi = [3, 1, 2] one-based gives (v3, v1, v2).
  const std::vector<std::size_t> pi = {2, 0, 1};
  const auto it = std::find(fam.permutations.begin(), fam.permutations.end(), pi);
  REQUIRE(it != fam.permutations.end());
  const auto& member = fam.members[static_cast<std::size_t>(it - fam.permutations.begin())];
  CHECK(member == std::vector<double>{0.1, 0.7, 0.2});

  const std::vector<double> uniform(4, 0.25);
  const auto ufam = permutations_of(uniform);
  CHECK(ufam.size() == 24);
  for (const auto& m : ufam.members) CHECK(m == uniform);

  CHECK(permutations_of(std::vector<double>(8, 0.125)).size() == 40320);
  CHECK_THROWS_AS(permutations_of(std::vector<double>(9, 1.0 / 9)), DomainError);
}

TEST_CASE("loss sums over classes") {
  std::mt19937_64 rng(4);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (std::size_t k : {3u, 5u}) {
    std::vector<double> u(k);
    double s = 0;
    for (double& x : u) s += (x = g(rng));
    for (double& x : u) x /= s;
    CHECK(loss_sum_over_classes(LossSpec::of(LossKind::kMAE), u) == doctest::Approx(2.0 * (k - 1)));
    CHECK(loss_sum_over_classes(LossSpec::of(LossKind::kNCE), u) == doctest::Approx(1.0));
    double expected = 0;
    for (std::size_t j = 0; j < k; ++j) expected += ce(u, j);
    CHECK(loss_sum_over_classes(LossSpec::of(LossKind::kCE), u) == doctest::Approx(expected));
  }
}

TEST_CASE("symmetric condition on a permutation family") {
  const std::vector<double> v = {0.6, 0.3, 0.1};
  for (LossKind kind : {LossKind::kCE, LossKind::kFL, LossKind::kGCE, LossKind::kMAE}) {
    const auto r = check_symmetric_condition(LossSpec::of(kind), v);
    CHECK(r.constant);
    CHECK(r.max_deviation <= 1e-12);
  }
  // Off the simplex.
  CHECK_THROWS_AS(check_symmetric_condition(LossSpec::of(LossKind::kCE), std::vector<double>{0.6, 0.6}),
                  DomainError);
}

TEST_CASE("risks on small instances") {
  const auto inst = instance({0.25, 0.75}, {0, 2}, symmetric_transition(3, 0.3));
  const LossSpec mae_spec = LossSpec::of(LossKind::kMAE);
  const Hypothesis perfect = {{1, 0, 0}, {0, 0, 1}};
  CHECK(clean_risk(mae_spec, perfect, inst) == 0.0);

  const Hypothesis h = {{0.5, 0.3, 0.2}, {0.1, 0.1, 0.8}};
  const double expected_clean = 0.25 * mae(h[0], 0) + 0.75 * mae(h[1], 2);
  CHECK(clean_risk(mae_spec, h, inst) == doctest::Approx(expected_clean).epsilon(1e-14));
  double expected_noisy = 0;
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t j = 0; j < 3; ++j)
      expected_noisy += inst.weights[p] * inst.transition(inst.labels[p], j) * mae(h[p], j);
  CHECK(noisy_risk(mae_spec, h, inst) == doctest::Approx(expected_noisy).epsilon(1e-14));

  const auto clean_inst = instance({1.0}, {1}, TransitionMatrix::identity(3));
  const Hypothesis single = {{0.2, 0.5, 0.3}};
  CHECK(clean_risk(LossSpec::of(LossKind::kCE), single, clean_inst) == doctest::Approx(-std::log(0.5)));
  CHECK(noisy_risk(LossSpec::of(LossKind::kCE), single, clean_inst) ==
        clean_risk(LossSpec::of(LossKind::kCE), single, clean_inst));

  CHECK_THROWS_AS(clean_risk(mae_spec, single, inst), ShapeError);
  CHECK_THROWS_AS(instance({0.5, 0.6}, {0, 1}, symmetric_transition(3, 0.2)).validate(), DomainError);
  CHECK_THROWS_AS(instance({0.5, 0.5}, {0, 3}, symmetric_transition(3, 0.2)).validate(), DomainError);
}

TEST_CASE("noisy risk is affine in clean risk under symmetric noise") {
  const std::size_t k = 10;
  const double eta = 0.4;
  const double slope = 1.0 - eta * k / (k - 1.0);
  CHECK(slope == doctest::Approx(5.0 / 9.0).epsilon(1e-15));
  const auto inst = random_instance(3, symmetric_transition(k, eta), 9);
  std::mt19937_64 rng(1);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(k);
    double s = 0;
    for (double& x : v) s += (x = g(rng));
    for (double& x : v) x /= s;
    const LossSpec spec = LossSpec::of(LossKind::kGCE);
    const double total = loss_sum_over_classes(spec, v);
    const auto fam = all_orderings(v);
    Hypothesis h;
    for (std::size_t p = 0; p < 3; ++p) h.push_back(fam[(trial * 7 + p * 13) % fam.size()]);
    const double lhs = noisy_risk(spec, h, inst);
    const double rhs = slope * clean_risk(spec, h, inst) + eta * total / (k - 1.0);
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("theorem1 argmin sets match brute force") {
  const std::vector<double> v = {0.7, 0.2, 0.1};
  const auto inst = instance({0.4, 0.6}, {0, 1}, symmetric_transition(3, 0.5));
  const auto report = verify_theorem1(LossSpec::of(LossKind::kCE), v, inst);
  CHECK(report.hypotheses.size() == 36);
  CHECK(report.holds());
  CHECK(report.noise_bound_holds);
  const auto [clean, noisy] = oracle_argmins(ce, v, inst);
  CHECK(report.clean_argmin == clean);
  CHECK(report.noisy_argmin == noisy);
  CHECK(clean == noisy);

  const auto zero = verify_theorem1(LossSpec::of(LossKind::kMAE), v,
                                    instance({0.4, 0.6}, {0, 1}, symmetric_transition(3, 0.0)));
  CHECK(zero.holds());
  CHECK(zero.clean_argmin == zero.noisy_argmin);

  const auto high = verify_theorem1(LossSpec::of(LossKind::kCE), v,
                                    instance({0.4, 0.6}, {0, 1}, symmetric_transition(3, 0.8)));
  CHECK_FALSE(high.noise_bound_holds);
  CHECK_FALSE(high.notes.empty());

  CHECK_THROWS_AS(verify_theorem1(LossSpec::of(LossKind::kCE), v,
                                  instance({1.0}, {0}, asymmetric_transition(FlipMap{{0, 1}}, 3, 0.2))),
                  DomainError);
}

TEST_CASE("theorem2 on one-hot outputs") {
  const std::vector<double> e0 = {1, 0, 0, 0};
  const FlipMap pairs = {{0, 1}, {2, 3}, {3, 2}};
  for (double eta : {0.2, 0.3, 0.4}) {
    auto inst = random_instance(3, asymmetric_transition(pairs, 4, eta), 17);
    const auto report = verify_theorem2(LossSpec::of(LossKind::kMAE), e0, inst);
    CAPTURE(eta);
    CHECK(report.holds());
    const auto [clean, noisy] = oracle_argmins(mae, e0, inst);
    CHECK(report.clean_argmin == clean);
    CHECK(report.noisy_argmin == noisy);
    for (std::size_t i : noisy) CHECK(std::binary_search(clean.begin(), clean.end(), i));
  }

  const auto inst = random_instance(2, asymmetric_transition(pairs, 4, 0.3), 3);
  const auto ce_soft = verify_theorem2(LossSpec::of(LossKind::kCE), std::vector<double>{0.7, 0.1, 0.1, 0.1}, inst);
  CHECK(ce_soft.verdict == Verdict::kPreconditionsViolated);

  const auto loud = random_instance(2, asymmetric_transition(FlipMap{{0, 1}}, 4, 0.5), 3);
  const auto over = verify_theorem2(LossSpec::of(LossKind::kMAE), e0, loud);
  CHECK(over.verdict == Verdict::kPreconditionsViolated);
  CHECK(to_string(over.verdict) == "preconditions violated");
}

TEST_CASE("delta estimate") {
  const std::vector<double> v = {0.8, 0.1, 0.1};
  const LossSpec ce_spec = LossSpec::of(LossKind::kCE);
  CHECK(estimate_delta(ce_spec, v, 0.0, 2000, 1) == 0.0);
  double previous = 0.0;
  for (double eps : {0.001, 0.01, 0.05, 0.2}) {
    const double d = estimate_delta(ce_spec, v, eps, 2000, 1);
    CHECK(d >= previous);
    previous = d;
  }
  CHECK(previous > 0.0);
  // MAE sums to 2(k - 1) everywhere on the simplex.
  CHECK(estimate_delta(LossSpec::of(LossKind::kMAE), v, 0.05, 2000, 1) <= 1e-12);
  CHECK_THROWS_AS(estimate_delta(ce_spec, v, -0.1, 10, 1), DomainError);
}

TEST_CASE("risk bound") {
  const std::vector<double> v = {0.8, 0.1, 0.1};
  const auto inst = random_instance(2, symmetric_transition(3, 0.5), 21);
  RiskBoundOptions opts;
  opts.hypotheses = 500;
  opts.delta_samples = 5000;
  const auto exact = verify_risk_bound(LossSpec::of(LossKind::kCE), v, 0.0, inst, 2, opts);
  CHECK(exact.holds());
  CHECK(*exact.bound_constant == doctest::Approx(1.0));
  CHECK(*exact.risk_gap <= 1e-9);

  const auto r = verify_risk_bound(LossSpec::of(LossKind::kCE), v, 0.05, inst, 2, opts);
  CHECK(r.holds());
  CHECK(*r.risk_gap <= *r.bound + kRiskBoundSlack);
  CHECK(*r.delta >= *r.delta_sampled);
  CHECK(*r.bound == doctest::Approx(2.0 * *r.bound_constant * *r.delta));

  const auto k10 = random_instance(1, symmetric_transition(10, 0.4), 1);
  const std::vector<double> v10(10, 0.1);
  opts.hypotheses = 20;
  opts.delta_samples = 100;
  const auto r10 = verify_risk_bound(LossSpec::of(LossKind::kMAE), v10, 0.01, k10, 1, opts);
  CHECK(*r10.bound_constant == doctest::Approx(0.08).epsilon(1e-14));

  CHECK_THROWS_AS(verify_risk_bound(LossSpec::of(LossKind::kCE), v, 0.01,
                                    random_instance(2, symmetric_transition(3, 0.7), 1), 1, opts),
                  DomainError);
}

TEST_CASE("report csv") {
  const std::vector<double> v = {0.7, 0.2, 0.1};
  const auto report = verify_theorem1(LossSpec::of(LossKind::kMAE), v,
                                      instance({0.5, 0.5}, {0, 1}, symmetric_transition(3, 0.2)));
  std::ostringstream out;
  write_report_csv(report, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "hypothesis,clean_risk,noisy_risk,flags");
  std::size_t rows = 0, flagged = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find("clean_min") != std::string::npos) ++flagged;
  }
  CHECK(rows == 36);
  CHECK(flagged == report.clean_argmin.size());
  CHECK(format_report(report).find("holds") != std::string::npos);
}

TEST_CASE("simplex projection satisfies the optimality conditions") {
  CHECK(project_to_simplex(std::vector<double>{2, 0}) == std::vector<double>{1, 0});
  const auto same = project_to_simplex(std::vector<double>{0.2, 0.3, 0.5});
  CHECK(same[0] == doctest::Approx(0.2));
  CHECK(same[2] == doctest::Approx(0.5));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(2 + trial % 6);
    for (double& e : x) e = n(rng);
    const auto p = project_to_simplex(x);
    double total = 0;
    for (double e : p) {
      CHECK(e >= 0.0);
      total += e;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // x_i - p_i equals a common theta on the support and x_i <= theta off it.
    double theta = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (p[i] > 0) theta = x[i] - p[i];
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (p[i] > 0) CHECK(x[i] - p[i] == doctest::Approx(theta).epsilon(1e-10));
      else CHECK(x[i] <= theta + 1e-12);
    }
  }
}
