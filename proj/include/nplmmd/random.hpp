#pragma once

#include <cstdint>
#include <random>

namespace nplmmd {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for stream `index` under `master`. Depends only on the pair, so a
/// task's stream does not depend on which worker runs it.
constexpr std::uint64_t split_seed(std::uint64_t master,
                                   std::uint64_t index) noexcept {
  return mix64(master + 0x9e3779b97f4a7c15ULL * (index + 1));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform on the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
  double u;
  do {
    u = uniform01(rng);
  } while (u <= 0.0);
  return u;
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace nplmmd
