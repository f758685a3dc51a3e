#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace gradlens {

/// Counter-style seed derivation: the same (root, name, counters) always maps
/// to the same 64-bit seed, independent of how many other streams exist or
/// the order in which they are created.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                          std::initializer_list<std::uint64_t> counters = {});

/// Owned pseudo-random stream. Each consumer (task data, rollouts, sampler)
/// gets its own instance built from a derived seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gradlens
