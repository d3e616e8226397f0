#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "invit/errors.hpp"

namespace invit {

/// splitmix64 finalizer; used to derive independent seeds from (root, tags).
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t root, std::initializer_list<uint64_t> tags) {
  uint64_t h = mix64(root ^ 0x1905f0e6a1c6b0a3ULL);
  for (uint64_t t : tags) h = mix64(h ^ mix64(t));
  return h;
}

/// Deterministic RNG with portable distribution transforms. mt19937_64 output
/// is pinned by the standard; the std:: distributions are not, so uniform,
/// normal and exponential draws are implemented here by hand.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  static Rng stream(uint64_t root, std::initializer_list<uint64_t> tags) {
    return Rng(derive_seed(root, tags));
  }

  uint64_t u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) throw LogicError("uniform_int: empty range");
    const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<int64_t>(u64());  // full 64-bit range
    const uint64_t reject_above = UINT64_MAX - UINT64_MAX % range;
    uint64_t x = u64();
    while (x >= reject_above) x = u64();
    return lo + static_cast<int64_t>(x % range);
  }

  /// Box-Muller; consumes exactly two engine draws per call.
  double normal(double mean = 0.0, double sd = 1.0) {
    double u1 = uniform();
    const double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Normal(mean, sd) conditioned on the result being >= lo, by rejection.
  double truncated_normal(double mean, double sd, double lo) {
    for (;;) {
      const double x = normal(mean, sd);
      if (x >= lo) return x;
    }
  }

  double exponential(double lambda) {
    if (lambda <= 0.0) throw LogicError("exponential: lambda must be positive");
    return -std::log(1.0 - uniform()) / lambda;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace invit
