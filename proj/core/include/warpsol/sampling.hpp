#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "warpsol/expr.hpp"

namespace warpsol {

// Deterministic 64-bit mix; used to derive independent per-task streams
// from one user seed so results do not depend on thread count.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t task_index);

// Small deterministic generator (xoshiro256**). Identical output on every
// platform, unlike the distributions in <random>.
class Rng {
public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double next_unit();                       // [0, 1)
  double next_in(double lo, double hi);     // [lo, hi)
  double next_gaussian();                   // standard normal
  // Uniform direction on the Euclidean unit sphere S^{n-1}.
  std::vector<double> next_direction(int n);

private:
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// `count` points from the inset box [lower+inset, upper-inset]^n.
// Uniform i.i.d. by default; `low_discrepancy` switches to a Halton
// sequence (bases = first n primes) with the seed acting as start offset.
std::vector<std::vector<double>> sample_points(const Domain& domain, int count,
                                               std::uint64_t seed,
                                               bool low_discrepancy = false);

}  // namespace warpsol
