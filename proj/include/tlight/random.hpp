#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace tlight {

/// SplitMix64 finalizer. Used to whiten user seeds before they reach the
/// engine, so that adjacent seeds (base + trial index) give unrelated streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for an independent sub-stream (arm 1, arm 2, detector, splitter...)
/// of one run.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Seed of trial `index` in a parallel sweep.
constexpr std::uint64_t trial_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return base + index;
}

/// Seeded random source. Uniform and exponential variates are built directly
/// from the engine bits; Poisson and binomial variates use the standard
/// library distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform_open(); }

  double exponential(double mean) noexcept { return -mean * std::log(uniform_open()); }

  std::uint32_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint32_t> dist(mean);
    return dist(engine_);
  }

  std::uint32_t binomial(std::uint32_t trials, double p) {
    if (trials == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    std::binomial_distribution<std::uint32_t> dist(trials, p);
    return dist(engine_);
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) noexcept {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tlight
