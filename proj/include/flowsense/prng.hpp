#pragma once

#include <cstdint>

namespace flowsense {

// xorshift64* generator (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D).
// Chosen over std::mt19937 so that datasets and initializations are
// reproducible bit-for-bit from the seed across toolchains and languages.
// A seed of zero (the one forbidden xorshift state) is remapped to a fixed
// odd constant.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(uint64_t seed)
      : state_(seed != 0 ? seed : 0x9E3779B97F4A7C15ull) {}

  uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Symmetric uniform in [-limit, limit].
  double uniform_pm(double limit) { return uniform(-limit, limit); }

  // Unbiased integer in [0, n) via Lemire's multiply-shift with rejection.
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    while (true) {
      uint64_t x = next();
      __uint128_t m = static_cast<__uint128_t>(x) * n;
      uint64_t lo = static_cast<uint64_t>(m);
      if (lo >= n || lo >= (0ull - n) % n) return static_cast<uint64_t>(m >> 64);
    }
  }

  bool next_bool() { return (next() & 1ull) != 0; }

 private:
  uint64_t state_;
};

}  // namespace flowsense
