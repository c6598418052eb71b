#include "seqtag/rng.hpp"

#include <cmath>
#include <numbers>

namespace seqtag {

double Rng::normal() {
  // u1 in (0, 1] so log never sees zero.
  const double u1 =
      (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::truncated_normal(double stddev, double cutoff) {
  double x;
  do {
    x = normal();
  } while (x < -cutoff || x > cutoff);
  return x * stddev;
}

std::uint64_t Rng::splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::mix(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the stream name, then mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ h);
}

}  // namespace seqtag
