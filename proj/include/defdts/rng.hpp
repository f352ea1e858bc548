#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace defdts {

// Deterministic draws on top of mt19937_64. The engine's sequence is pinned
// by the standard; std::uniform_int_distribution is not, so bounded draws are
// done here to keep generated corpora byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Inclusive bounds. Rejection sampling keeps the draw unbiased.
  int uniform_int(int lo, int hi) {
    uint64_t span = uint64_t(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return lo + int(v % span);
  }

  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

// Counter-based sub-seed derivation (splitmix64 step), so per-dialogue
// streams are independent of corpus subsetting.
inline uint64_t derive_seed(uint64_t seed, uint64_t counter) {
  uint64_t z = seed + counter * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable 64-bit string hash (FNV-1a) for id-keyed seed derivation.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace defdts
