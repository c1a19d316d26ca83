#pragma once

#include <cstdint>
#include <random>

namespace spectralprior {

/// Portable random stream. std::mt19937_64 output is fixed by the standard; the
/// std distributions are not, so the conversions to real values live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Derive an independent child seed (splitmix64 of seed ^ salt).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace spectralprior
