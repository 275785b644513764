#pragma once

#include <cstdint>
#include <random>

namespace jsdm {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for substream `b` of substream `a` of a run seeded with `seed`.
/// Parallel kernels partition work by (a, b) so results do not depend on thread count.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd1342543de82ef95ULL));
}

/// Uniform on the open interval (0, 1).
inline double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double std_normal_draw(Rng& rng) {
  std::normal_distribution<double> n;
  return n(rng);
}

}  // namespace jsdm
