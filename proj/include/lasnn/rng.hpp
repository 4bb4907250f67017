#pragma once

#include <cstdint>
#include <string_view>

namespace lasnn {

// All randomness in the engine comes from SplitMix64. The generator is
// counter-based: the state advances by a fixed gamma and the output is a
// finalizing hash of the state, so any position of any stream can also be
// computed directly from (seed, counter) without iterating. Streams are
// identical across platforms for a given seed.

constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t combine64(std::uint64_t h, std::uint64_t v) {
  return mix64(h + kSplitMixGamma + v);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

// Derives an independent child seed from a root seed, a purpose tag and up to
// three indices (epoch, batch, sample, ...). Used to give every consumer of
// randomness its own stream so that code paths can be added or removed
// without perturbing unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                    std::uint64_t a = 0, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
  std::uint64_t h = combine64(seed, fnv1a64(tag));
  h = combine64(h, a);
  h = combine64(h, b);
  h = combine64(h, c);
  return h;
}

// Uniform float in [0,1) from the top 24 bits, so the mapping is exact in
// binary32 and identical everywhere.
constexpr float u64_to_unit_float(std::uint64_t x) {
  return static_cast<float>(x >> 40) * (1.0f / 16777216.0f);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kSplitMixGamma;
    return mix64(state_);
  }

  float next_float() { return u64_to_unit_float(next_u64()); }

  // Uniform in [lo, hi).
  float next_float(float lo, float hi) { return lo + (hi - lo) * next_float(); }

  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; consumes two uniforms per pair, second value cached.
  float next_gaussian();

  std::uint64_t seed_for(std::string_view tag, std::uint64_t a = 0,
                         std::uint64_t b = 0, std::uint64_t c = 0) const {
    return derive_seed(state_, tag, a, b, c);
  }

 private:
  std::uint64_t state_;
  bool have_cached_ = false;
  float cached_ = 0.0f;
};

}  // namespace lasnn
