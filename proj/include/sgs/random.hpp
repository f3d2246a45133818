#pragma once

#include <cstdint>

namespace sgs {

// splitmix64 finalizer; good avalanche, cheap.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-based stream: hash a fixed-length key into one 64-bit word.
// Stateless, so draws are reproducible regardless of evaluation order.
inline uint64_t hash_key(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = mix64(seed);
  h = mix64(h ^ (a + 0x2545f4914f6cdd1dull));
  h = mix64(h ^ (b + 0x9e3779b97f4a7c15ull));
  h = mix64(h ^ (c + 0xd1b54a32d192ed03ull));
  return h;
}

// Uniform in the open interval (0,1), 53-bit resolution.
inline double to_unit_open(uint64_t h) {
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Inverse normal CDF, Wichura's AS241 (PPND16). Relative error ~1e-15
// over the full open interval.
double normal_icdf(double p);

// Standard-normal draw addressed by (seed, stream, element, slot).
inline double normal_draw(uint64_t seed, uint64_t stream, uint64_t element, uint64_t slot) {
  return normal_icdf(to_unit_open(hash_key(seed, stream, element, slot)));
}

// Uniform draw in [lo, hi) addressed the same way.
inline double uniform_draw(uint64_t seed, uint64_t stream, uint64_t element, uint64_t slot,
                           double lo, double hi) {
  return lo + (hi - lo) * to_unit_open(hash_key(seed, stream, element, slot));
}

}  // namespace sgs
