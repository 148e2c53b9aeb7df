#pragma once

#include <cmath>
#include <cstdint>

namespace xmreg {

// Counter-based 64-bit generator (splitmix64 constants). Streams are
// reproducible across platforms and languages, which is what the synthetic
// fixtures rely on.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit mantissa.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is negligible for the n used here
  // and determinism matters more than equidistribution.
  uint64_t uniform_int(uint64_t n) { return next() % n; }

  double gaussian() {
    // Box-Muller; always consumes exactly two draws.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

// Stateless hash of a few integers into [0, 1); used for procedural textures.
inline uint64_t mix_u64(uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double hash01(uint64_t seed, int64_t a, int64_t b) {
  uint64_t h = mix_u64(seed + 0x9e3779b97f4a7c15ull * static_cast<uint64_t>(a + 0x7f4a7c15));
  h = mix_u64(h ^ (0xbf58476d1ce4e5b9ull * static_cast<uint64_t>(b + 0x1ce4e5b9)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace xmreg
