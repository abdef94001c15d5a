#pragma once

#include <cstdint>

namespace cleaner {

// Deterministic seeded random stream (splitmix64). The standard library
// distributions are not bit-stable across implementations, so all sampling in
// this project goes through this class.
//
// A stream has two parts: `lineage`, the immutable identity it was created
// with, and `state`, the draw cursor. derive() keys child streams off the
// lineage only, so deriving is order-independent with respect to draws: the
// same (seed, tags) always names the same child stream no matter how much of
// the parent has been consumed.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : lineage_(seed), state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi] inclusive. Bounded rejection keeps it exact.
  int64_t next_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t draw;
    do {
      draw = next_u64();
    } while (draw >= limit);
    return lo + static_cast<int64_t>(draw % span);
  }

  RandomStream derive(uint64_t a, uint64_t b = 0, uint64_t c = 0) const {
    uint64_t s = lineage_;
    s = mix(s ^ mix(a + 0x8bb84b93962eacc9ULL));
    s = mix(s ^ mix(b + 0x2545f4914f6cdd1dULL));
    s = mix(s ^ mix(c + 0xd1342543de82ef95ULL));
    return RandomStream(s);
  }

  uint64_t lineage() const { return lineage_; }

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  uint64_t lineage_;
  uint64_t state_;
};

}  // namespace cleaner
