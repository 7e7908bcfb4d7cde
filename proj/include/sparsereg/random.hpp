#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sparsereg {

using Rng = std::mt19937_64;

// Generator keyed by several integers, e.g. (run seed, epoch).
inline Rng make_rng(std::initializer_list<std::uint64_t> keys) {
  std::seed_seq seq(keys.begin(), keys.end());
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace sparsereg
