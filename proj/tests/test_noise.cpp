#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <set>
#include <sstream>

#include "sparsereg/error.hpp"
#include "sparsereg/noise.hpp"

using namespace sparsereg;

namespace {

void check_row_stochastic(const TransitionMatrix& t) {
  for (std::size_t i = 0; i < t.classes(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < t.classes(); ++j) total += t(i, j);
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

}  // namespace

TEST_CASE("transition matrix validation") {
  CHECK_THROWS_AS(TransitionMatrix(Matrix(2, 3)), DomainError);
  CHECK_THROWS_AS(TransitionMatrix(Matrix::from_rows({{0.5, 0.4}, {0, 1}})), DomainError);
  CHECK_THROWS_AS(TransitionMatrix(Matrix::from_rows({{1.5, -0.5}, {0, 1}})), DomainError);
  const TransitionMatrix id = TransitionMatrix::identity(3);
  CHECK(id(1, 1) == 1.0);
  CHECK(id.flip_rate(2) == 0.0);
  CHECK(id.symmetric_rate() == 0.0);
}

TEST_CASE("symmetric transition") {
  const auto t = symmetric_transition(3, 0.4);
  CHECK(t(0, 0) == doctest::Approx(0.6));
  CHECK(t(0, 1) == doctest::Approx(0.2));
  CHECK(t(2, 1) == doctest::Approx(0.2));
  CHECK(symmetric_transition(4, 0.0) == TransitionMatrix::identity(4));
  const auto t10 = symmetric_transition(10, 0.8);
  CHECK(t10(3, 3) == doctest::Approx(0.2));
  CHECK(t10(3, 4) == doctest::Approx(0.8 / 9));
  CHECK(t10.below_symmetric_bound());
  CHECK(*t10.symmetric_rate() == doctest::Approx(0.8));
  CHECK_FALSE(symmetric_transition(3, 0.7).below_symmetric_bound());
  CHECK_THROWS_AS(symmetric_transition(3, 1.0), DomainError);
  CHECK_THROWS_AS(symmetric_transition(3, -0.1), DomainError);
  for (double eta : {0.0, 0.2, 0.6, 0.9}) check_row_stochastic(symmetric_transition(7, eta));
}

TEST_CASE("asymmetric presets") {
  const auto mnist = asymmetric_transition(FlipPreset::kMnist, 10, 0.3);
  CHECK(mnist(2, 2) == doctest::Approx(0.7));
  CHECK(mnist(2, 7) == doctest::Approx(0.3));
  CHECK(mnist(0, 0) == 1.0);
  CHECK(mnist(5, 6) == doctest::Approx(0.3));
  CHECK(mnist(6, 5) == doctest::Approx(0.3));
  CHECK(mnist(7, 1) == doctest::Approx(0.3));
  CHECK(mnist(3, 8) == doctest::Approx(0.3));
  CHECK_FALSE(mnist.symmetric_rate().has_value());

  CHECK(asymmetric_transition(FlipPreset::kMnist, 10, 0.0) == TransitionMatrix::identity(10));

  const auto cifar = asymmetric_transition(FlipPreset::kCifar10, 10, 0.4);
  CHECK(cifar(9, 9) == doctest::Approx(0.6));  // truck
  CHECK(cifar(9, 1) == doctest::Approx(0.4));  // automobile
  CHECK(cifar(2, 0) == doctest::Approx(0.4));  // bird -> airplane
  CHECK(cifar(4, 7) == doctest::Approx(0.4));  // deer -> horse
  CHECK(cifar(3, 5) == doctest::Approx(0.4));
  CHECK(cifar(5, 3) == doctest::Approx(0.4));

  const auto c100 = asymmetric_transition(FlipPreset::kCifar100Superclass, 100, 0.2);
  check_row_stochastic(c100);
  const auto& groups = cifar100_superclasses();
  REQUIRE(groups.size() == 20);
  std::set<std::size_t> seen;
  for (const auto& g : groups) {
    REQUIRE(g.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      seen.insert(g[i]);
      CHECK(c100(g[i], g[(i + 1) % 5]) == doctest::Approx(0.2));
      CHECK(c100(g[i], g[i]) == doctest::Approx(0.8));
    }
  }
  CHECK(seen.size() == 100);

  CHECK_THROWS_AS(asymmetric_transition(FlipPreset::kMnist, 10, 0.6), DomainError);
  CHECK_THROWS_AS(asymmetric_transition(FlipPreset::kMnist, 5, 0.3), DomainError);
  CHECK(parse_flip_preset("cifar10") == FlipPreset::kCifar10);
  CHECK_THROWS_AS(parse_flip_preset("svhn"), FormatError);
}

TEST_CASE("flip map parsing and validation") {
  std::istringstream in("# comment\n0->1\n\n 2 -> 3\n3->2\n");
  const FlipMap map = parse_flip_map(in);
  REQUIRE(map.size() == 3);
  CHECK(map[1] == std::pair<std::size_t, std::size_t>{2, 3});

  std::istringstream bad("0=>1\n");
  CHECK_THROWS_AS(parse_flip_map(bad), FormatError);
  CHECK_THROWS_AS(asymmetric_transition(FlipMap{{0, 4}}, 4, 0.2), DomainError);
  CHECK_THROWS_AS(asymmetric_transition(FlipMap{{1, 1}}, 4, 0.2), DomainError);
  CHECK_THROWS_AS(asymmetric_transition(FlipMap{{0, 1}, {0, 2}}, 4, 0.2), DomainError);
  CHECK_THROWS_AS(read_flip_map("/nonexistent/map.txt"), FormatError);
}

TEST_CASE("corrupt with identity keeps labels") {
  std::vector<std::size_t> labels(500);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 5;
  const auto c = corrupt(labels, TransitionMatrix::identity(5), 3);
  CHECK(c.labels == labels);
  for (bool f : c.flipped) CHECK_FALSE(f);
}

TEST_CASE("corrupt is deterministic per seed") {
  std::vector<std::size_t> labels(2000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 10;
  const auto t = symmetric_transition(10, 0.5);
  const auto a = corrupt(labels, t, 42);
  const auto b = corrupt(labels, t, 42);
  const auto c = corrupt(labels, t, 43);
  CHECK(a.labels == b.labels);
  CHECK(a.flipped == b.flipped);
  CHECK(a.labels != c.labels);
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(a.flipped[i] == (a.labels[i] != labels[i]));
}

TEST_CASE("symmetric corruption rate is within three binomial sigmas") {
  const std::size_t n = 10000;
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 10;
  const auto c = corrupt(labels, symmetric_transition(10, 0.6), 7);
  const auto rates = empirical_rate(labels, c.labels, 10);
  CHECK(std::abs(rates.overall - 0.6) <= 3 * std::sqrt(0.6 * 0.4 / n));
  // True class never appears among flip targets.
  for (std::size_t i = 0; i < n; ++i) {
    if (c.flipped[i]) CHECK(c.labels[i] != labels[i]);
  }
}

TEST_CASE("corruption per source class passes a chi-squared fit") {
  const std::size_t n = 100000;
  for (const auto& t : {symmetric_transition(4, 0.6), asymmetric_transition(FlipMap{{0, 1}, {2, 3}, {3, 2}}, 4, 0.35)}) {
    for (std::size_t y = 0; y < 4; ++y) {
      const std::vector<std::size_t> labels(n, y);
      const auto c = corrupt(labels, t, 1000 + y);
      std::vector<double> counts(4, 0.0);
      for (std::size_t l : c.labels) counts[l] += 1.0;
      double stat = 0.0;
      std::size_t cells = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        const double expected = t(y, j) * static_cast<double>(n);
        if (expected == 0.0) {
          CHECK(counts[j] == 0.0);
          continue;
        }
        stat += (counts[j] - expected) * (counts[j] - expected) / expected;
        ++cells;
      }
      if (cells < 2) continue;
      const boost::math::chi_squared dist(static_cast<double>(cells - 1));
      const double critical = boost::math::quantile(boost::math::complement(dist, 0.01));
      CAPTURE(y);
      CHECK(stat < critical);
    }
  }
}

TEST_CASE("asymmetric mnist corruption touches only mapped classes") {
  std::vector<std::size_t> labels(20000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 10;
  const auto c = corrupt(labels, asymmetric_transition(FlipPreset::kMnist, 10, 0.4), 5);
  const std::set<std::size_t> sources = {2, 7, 5, 6, 3};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!sources.count(labels[i])) CHECK_FALSE(c.flipped[i]);
  }
  const auto rates = empirical_rate(labels, c.labels, 10);
  CHECK(rates.per_class[0] == 0.0);
  CHECK(rates.per_class[2] == doctest::Approx(0.4).epsilon(0.1));
}

TEST_CASE("empirical rate") {
  const std::vector<std::size_t> a = {0, 1, 2, 1};
  CHECK(empirical_rate(a, a, 3).overall == 0.0);
  const std::vector<std::size_t> b = {1, 2, 0, 0};
  const auto r = empirical_rate(a, b, 3);
  CHECK(r.overall == 1.0);
  CHECK(r.per_class[1] == 1.0);
  const std::vector<std::size_t> shorter = {0};
  CHECK_THROWS_AS(empirical_rate(a, shorter, 3), ShapeError);
}
