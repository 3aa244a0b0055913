#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace xreid {

// Deterministic random helpers on top of mt19937. std::*_distribution is
// implementation-defined, so everything that lands in an artifact (dataset
// blobs, parameter init, batch draws) goes through these instead.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(static_cast<std::mt19937::result_type>(seed)) {}

  // Uniform integer in [0, bound), bound >= 1. Rejection sampling keeps the
  // draw unbiased without touching std::uniform_int_distribution.
  uint32_t uniform_index(uint32_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::uniform_index: bound must be positive");
    const uint32_t limit = UINT32_MAX - (UINT32_MAX % bound);
    uint32_t v = gen_();
    while (v >= limit) v = gen_();
    return v % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    const uint64_t hi = static_cast<uint64_t>(gen_()) << 32;
    const uint64_t bits = (hi | gen_()) >> 11;
    return static_cast<double>(bits) * (1.0 / 9007199254740992.0);
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates over [0, n); returns a freshly shuffled index vector.
  std::vector<uint32_t> permutation(uint32_t n) {
    std::vector<uint32_t> idx(n);
    for (uint32_t i = 0; i < n; ++i) idx[i] = i;
    for (uint32_t i = n; i > 1; --i) {
      const uint32_t j = uniform_index(i);
      std::swap(idx[i - 1], idx[j]);
    }
    return idx;
  }

  std::mt19937& engine() { return gen_; }

 private:
  std::mt19937 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace xreid
