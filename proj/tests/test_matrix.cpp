#include <doctest.h>

#include <cmath>
#include <random>

#include "sparsereg/error.hpp"
#include "sparsereg/matrix.hpp"
#include "sparsereg/primitives.hpp"

using namespace sparsereg;

TEST_CASE("matrix construction and access") {
  Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  CHECK(m.row(1)[0] == 4);
  CHECK(m.shape_string() == "2x3");
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  m(0, 0) = NAN;
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("matmul variants agree with a naive triple loop") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  Matrix a(4, 3), b(3, 5);
  for (double& v : a.values()) v = n(rng);
  for (double& v : b.values()) v = n(rng);
  Matrix expected(4, 5);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t k = 0; k < 3; ++k) expected(i, j) += a(i, k) * b(k, j);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-14));

  Matrix at(3, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k) at(k, i) = a(i, k);
  const Matrix c2 = matmul_transpose_a(at, b);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c2.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-14));

  Matrix bt(5, 3);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 5; ++j) bt(j, k) = b(k, j);
  const Matrix c3 = matmul_transpose_b(a, bt);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c3.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-14));

  CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("gather_rows copies in the given order") {
  const Matrix m = Matrix::from_rows({{1, 1}, {2, 2}, {3, 3}});
  const std::vector<std::size_t> idx = {2, 0};
  const Matrix g = m.gather_rows(idx);
  CHECK(g == Matrix::from_rows({{3, 3}, {1, 1}}));
}

TEST_CASE("softmax_tau examples") {
  auto s = softmax_tau(std::vector<double>{0, 0}, 0.37);
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(0.5));

  const double e2 = std::exp(2.0);
  s = softmax_tau(std::vector<double>{1, -1}, 1.0);
  CHECK(s[0] == doctest::Approx(e2 / (e2 + 1)).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(1 / (e2 + 1)).epsilon(1e-15));

  s = softmax_tau(std::vector<double>{1, -1}, 0.1);
  CHECK(s[0] > 1 - 1e-8);

  CHECK_THROWS_AS(softmax_tau(std::vector<double>{1, 2}, 0.0), DomainError);
  CHECK_THROWS_AS(softmax_tau(std::vector<double>{1, 2}, -1.0), DomainError);

  // Large logits do not overflow.
  s = softmax_tau(std::vector<double>{1000, 999}, 0.01);
  CHECK(std::isfinite(s[0]));
  CHECK(s[0] + s[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax_tau outputs lie on the simplex") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 5);
  std::uniform_real_distribution<double> t(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(2 + trial % 7);
    for (double& v : z) v = n(rng);
    const auto s = softmax_tau(z, t(rng));
    double total = 0;
    for (double v : s) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax_tau_jacobian") {
  const Matrix j = softmax_tau_jacobian(std::vector<double>{0, 0}, 1.0);
  CHECK(j(0, 0) == doctest::Approx(0.25));
  CHECK(j(0, 1) == doctest::Approx(-0.25));
  CHECK(j(1, 0) == doctest::Approx(-0.25));
  CHECK(j(1, 1) == doctest::Approx(0.25));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(4);
    for (double& v : z) v = n(rng);
    const Matrix jac = softmax_tau_jacobian(z, 0.3);
    for (std::size_t r = 0; r < 4; ++r) {
      double row = 0;
      for (std::size_t c = 0; c < 4; ++c) {
        row += jac(r, c);
        CHECK(jac(r, c) == doctest::Approx(jac(c, r)).epsilon(1e-12));
      }
      CHECK(std::abs(row) < 1e-12);
    }
    // Finite-difference oracle, one output coordinate at a time.
    for (std::size_t out = 0; out < 4; ++out) {
      const auto fd = finite_diff_gradient(
          [&](std::span<const double> x) { return softmax_tau(x, 0.3)[out]; }, z);
      for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(fd[i] - jac(out, i)) < 1e-6);
    }
  }
}

TEST_CASE("l2_normalize") {
  auto r = l2_normalize(std::vector<double>{3, 4});
  CHECK(r.values[0] == doctest::Approx(0.6));
  CHECK(r.values[1] == doctest::Approx(0.8));
  CHECK_FALSE(r.degenerate);

  r = l2_normalize(std::vector<double>{0, 1});
  CHECK(r.values == std::vector<double>{0, 1});

  r = l2_normalize(std::vector<double>{0, 0});
  CHECK(r.values == std::vector<double>{0, 0});
  CHECK(r.degenerate);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(5);
    for (double& v : z) v = n(rng);
    const auto out = l2_normalize(z).values;
    double norm = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      norm += out[i] * out[i];
      CHECK(std::abs(out[i]) <= 1.0);
      CHECK(out[i] * z[i] >= 0.0);
    }
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("finite_diff_gradient") {
  // f(x, y) = x^2 y + 3y  -> (2xy, x^2 + 3)
  const auto g = finite_diff_gradient(
      [](std::span<const double> p) { return p[0] * p[0] * p[1] + 3 * p[1]; },
      std::vector<double>{1.5, -2.0});
  CHECK(g[0] == doctest::Approx(-6.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(5.25).epsilon(1e-8));

  CHECK_THROWS_AS(finite_diff_gradient([](std::span<const double>) { return NAN; },
                                       std::vector<double>{1.0}),
                  DomainError);
  CHECK_THROWS_AS(finite_diff_gradient([](std::span<const double>) { return 0.0; },
                                       std::vector<double>{1.0}, 0.0),
                  DomainError);
}

TEST_CASE("relative_error") {
  const std::vector<double> a = {1, 0}, b = {1, 0}, c = {0, 1};
  CHECK(relative_error(a, b) == 0.0);
  CHECK(relative_error(a, c) == doctest::Approx(std::sqrt(2.0)));
  const std::vector<double> z = {0, 0};
  CHECK(relative_error(z, z) == 0.0);
  const std::vector<double> tiny = {1e-12, 0};
  CHECK(relative_error(tiny, z, 1e-8) == doctest::Approx(1e-4));
}

TEST_CASE("clamped_log floors its argument") {
  CHECK(clamped_log(0.0) == doctest::Approx(std::log(kProbabilityFloor)));
  CHECK(clamped_log(0.5) == doctest::Approx(std::log(0.5)));
}
