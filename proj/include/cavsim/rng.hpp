#pragma once

#include <cstdint>
#include <initializer_list>

namespace cavsim {

// splitmix64; used both as a stream generator and as a stateless hash so that
// every random draw in the simulator is keyed by (seed, purpose, ids, tick)
// instead of call order. This is what makes traces bitwise reproducible.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_key(uint64_t seed, std::initializer_list<uint64_t> parts) {
  uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ull);
  for (uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

// Uniform in [0, 1).
inline double hashed_unit(uint64_t seed, std::initializer_list<uint64_t> parts) {
  return double(hash_key(seed, parts) >> 11) * 0x1.0p-53;
}

// Uniform in [-bound, bound].
inline double hashed_symmetric(uint64_t seed, std::initializer_list<uint64_t> parts,
                               double bound) {
  return (2.0 * hashed_unit(seed, parts) - 1.0) * bound;
}

// Sequential stream for arrival processes and scenario generation.
struct SplitMix64 {
  uint64_t state = 0;
  explicit SplitMix64(uint64_t s) : state(s) {}
  uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double unit() { return double(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
};

}  // namespace cavsim
