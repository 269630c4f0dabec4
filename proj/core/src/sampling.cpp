#include "warpsol/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace warpsol {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t task_index) {
  std::uint64_t s = seed ^ (0xA0761D6478BD642FULL * (task_index + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

Rng::Rng(std::uint64_t seed) {
  // xoshiro state must not be all zero; splitmix64 seeding guarantees that.
  std::uint64_t s = seed;
  for (auto& w : s_) w = splitmix64(s);
}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

double Rng::next_gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method
  double u, v, s;
  do {
    u = 2.0 * next_unit() - 1.0;
    v = 2.0 * next_unit() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  have_spare_ = true;
  return u * factor;
}

std::vector<double> Rng::next_direction(int n) {
  if (n < 1) throw std::invalid_argument("next_direction: n must be >= 1");
  if (n == 1) return {next_unit() < 0.5 ? -1.0 : 1.0};
  std::vector<double> v(n);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
      v[i] = next_gaussian();
      norm2 += v[i] * v[i];
    }
  } while (norm2 < 1e-12);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                           31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double halton(std::uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

}  // namespace

std::vector<std::vector<double>> sample_points(const Domain& domain, int count,
                                               std::uint64_t seed, bool low_discrepancy) {
  if (count < 0) throw std::invalid_argument("sample_points: negative count");
  const int n = domain.dimension;
  if (low_discrepancy && n > static_cast<int>(std::size(kPrimes)))
    throw std::invalid_argument("sample_points: Halton bases exhausted for this dimension");

  std::vector<std::vector<double>> points;
  points.reserve(count);
  Rng rng(seed);
  for (int k = 0; k < count; ++k) {
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) {
      const double lo = domain.lower[i] + domain.inset;
      const double hi = domain.upper[i] - domain.inset;
      const double t = low_discrepancy
                           ? halton(seed + 1 + static_cast<std::uint64_t>(k), kPrimes[i])
                           : rng.next_unit();
      p[i] = lo + (hi - lo) * t;
    }
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace warpsol
