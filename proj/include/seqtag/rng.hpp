#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace seqtag {

// Deterministic random source. All project randomness flows from one config
// seed through named substreams ("mask", "shuffle", "init", ...), so modules
// never share or race a stream. Distributions are hand-rolled on top of
// mt19937_64 because the std::*_distribution algorithms are not pinned by the
// standard and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t seed, std::string_view name) {
    return Rng(mix(seed, name));
  }
  static Rng substream(std::uint64_t seed, std::string_view name,
                       std::uint64_t a) {
    return Rng(splitmix64(mix(seed, name) ^ a));
  }
  static Rng substream(std::uint64_t seed, std::string_view name,
                       std::uint64_t a, std::uint64_t b) {
    return Rng(splitmix64(splitmix64(mix(seed, name) ^ a) ^ b));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, bound), bound >= 1. Rejection keeps it unbiased.
  std::uint64_t uniform_u64(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform_real() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (cosine branch only, no cached state).
  double normal();

  // N(0, stddev^2) truncated to +-cutoff*stddev by rejection.
  double truncated_normal(double stddev, double cutoff = 2.0);

  // Fisher-Yates. Consumes no draws for size <= 1.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_u64(i)]);
    }
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t x);
  static std::uint64_t mix(std::uint64_t seed, std::string_view name);

  std::mt19937_64 engine_;
};

}  // namespace seqtag
