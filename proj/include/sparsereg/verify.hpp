#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sparsereg {

inline constexpr std::string_view kVerifySuites[] = {"lemma1",   "theorem1",  "theorem2",
                                                     "theorem3", "gradients", "all"};

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::optional<double> eta;
  std::optional<std::size_t> classes;
  std::optional<std::size_t> points;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  // Recorded-only checks (e.g. outside a theorem's noise bound) never fail a suite.
  bool asserted = true;
  std::string detail;
};

// Runs a suite by name. Throws DomainError for unknown suite names.
std::vector<CheckResult> run_verify_suite(std::string_view suite, const VerifyOptions& options);

// Relative error of backward() against central differences (h = 1e-5) of the
// full training objective of a small MLP, at `points` random draws. Returns
// the worst error seen.
double worst_gradient_error(std::string_view loss_kind, bool with_sr, std::size_t points,
                            std::uint64_t seed);

}  // namespace sparsereg
