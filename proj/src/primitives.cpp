#include "sparsereg/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparsereg/error.hpp"

namespace sparsereg {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw DomainError("softmax temperature must be positive, got " + std::to_string(tau));
  }
}

}  // namespace

std::vector<double> softmax_tau(std::span<const double> z, double tau) {
  check_tau(tau);
  if (z.empty()) return {};
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp((z[i] - top) / tau);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

Matrix softmax_tau_jacobian(std::span<const double> z, double tau) {
  const auto s = softmax_tau(z, tau);
  const std::size_t k = s.size();
  Matrix jac(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      const double delta = i == j ? 1.0 : 0.0;
      jac(j, i) = s[i] * (delta - s[j]) / tau;
    }
  }
  return jac;
}

NormalizedVector l2_normalize(std::span<const double> z) {
  double sq = 0.0;
  for (double v : z) sq += v * v;
  const double norm = std::sqrt(sq);
  NormalizedVector out{{z.begin(), z.end()}, false};
  if (norm < kNormFloor) {
    out.degenerate = true;
    return out;
  }
  for (double& v : out.values) v /= norm;
  return out;
}

double clamped_log(double u) { return std::log(std::max(u, kProbabilityFloor)); }

std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> point,
                                         double step) {
  if (!(step > 0.0)) throw DomainError("finite difference step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw DomainError("non-finite function value at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ShapeError("relative_error on vectors of different length");
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(std::max(na, nb)), floor);
  if (denom == 0.0) return 0.0;
  return std::sqrt(diff) / denom;
}

}  // namespace sparsereg
