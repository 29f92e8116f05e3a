#pragma once

#include <cstdint>

namespace vortex {

// Counter-based randomness: every draw is a pure function of
// (stream seed, arm, round). Two rollouts that share a seed see identical
// draws per (arm, round) regardless of the actions taken, which is what
// makes common-random-number comparisons between policies work.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derive a substream seed, e.g. mix_seed(master, episode).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt + 0x6A09E667F3BCC909ULL));
}

inline double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;  // [0, 1)
}

struct RandomStream {
  std::uint64_t seed = 0;

  double uniform(std::uint64_t arm, std::uint64_t round) const {
    std::uint64_t c = seed;
    c ^= splitmix64(arm * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
    c ^= splitmix64(round * 0xBF58476D1CE4E5B9ULL + 0x8CB92BA72F3D8DD7ULL);
    return to_unit(splitmix64(c));
  }
};

}  // namespace vortex
