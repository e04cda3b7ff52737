#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "gnssr/hashing.hpp"

namespace gnssr {

// Deterministic RNG wrapper. mt19937_64 itself is portable, but the
// distributions in <random> are not pinned by the standard, so every draw
// shape we rely on is implemented here explicitly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Multiply-shift; bias is negligible for n << 2^64 and identical
    // everywhere, which is what matters here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(eng_()) * n) >> 64);
  }

  // Standard normal via Box–Muller. One value per call; the partner draw is
  // cached so call parity does not change the stream consumed.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher–Yates over an index-addressable container.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stateless keyed draws for fields that must be samplable in any order.
inline double keyed_uniform(std::uint64_t key) { return hash01(key); }

inline double keyed_normal(std::uint64_t key) {
  double u1 = hash01(splitmix64(key));
  const double u2 = hash01(splitmix64(key ^ 0x5851f42d4c957f2dull));
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace gnssr
