#pragma once

// Counter-based random streams.
//
// Every draw in the simulator comes from a Stream keyed by
// (master seed, purpose tag, up to three entity ids). Two streams with
// different keys are statistically independent, and the value of the k-th
// draw of a stream depends only on its key and k, so neither generation
// order nor thread scheduling can change a result.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

namespace zkmrta {

enum class StreamTag : std::uint64_t {
  WorldTypes = 1,
  WorldFactors,
  WorldPositions,
  Perturbation,
  PersistentMask,
  RoundMask,
  ObservationNoise,
  Menu,
  Contention,
  GuessedRank,
  PolicyInit,
  PolicyExplore,
  PolicyLearn,
  CeilingNoise,
  UnseenEval,
  RandomBaseline,
  Bootstrap,
  Analysis,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Stream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t index(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Uniform size-k subset of {0..n-1}, returned in increasing order.
  std::vector<int> subset(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    // partial Fisher-Yates
    for (int i = 0; i < k; ++i) {
      const auto j = i + static_cast<int>(index(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Stream make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ULL);
  h = mix64(h ^ (static_cast<std::uint64_t>(tag) * 0xd1b54a32d192ed03ULL));
  h = mix64(h ^ (a + 0x243f6a8885a308d3ULL));
  h = mix64(h ^ (b + 0x13198a2e03707344ULL));
  h = mix64(h ^ (c + 0xa4093822299f31d0ULL));
  return Stream(h);
}

}  // namespace zkmrta
