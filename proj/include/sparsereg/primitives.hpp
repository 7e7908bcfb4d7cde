#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sparsereg/matrix.hpp"

namespace sparsereg {

// Probabilities are floored here before log / negative powers.
inline constexpr double kProbabilityFloor = 1e-7;
// Rows with a smaller Euclidean norm are left unnormalized.
inline constexpr double kNormFloor = 1e-12;

// Temperature softmax: exp(z_i / tau) / sum_j exp(z_j / tau), max-shifted.
std::vector<double> softmax_tau(std::span<const double> z, double tau);

// J(j, i) = d softmax_tau(z)_j / d z_i = (1/tau) s_i (delta_ij - s_j).
Matrix softmax_tau_jacobian(std::span<const double> z, double tau);

struct NormalizedVector {
  std::vector<double> values;
  bool degenerate = false;  // input norm below kNormFloor, returned unchanged
};

NormalizedVector l2_normalize(std::span<const double> z);

// log(max(u, kProbabilityFloor)).
double clamped_log(double u);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h. Throws DomainError on
// a non-finite function value or step <= 0.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> point,
                                         double step = 1e-5);

// ||a - b|| / max(||a||, ||b||, floor); 0 when the denominator is zero.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 0.0);

}  // namespace sparsereg
