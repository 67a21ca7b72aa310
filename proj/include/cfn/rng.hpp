#pragma once

#include <cstdint>

namespace cfn {

// SplitMix64 generator with keyed stream derivation. Streams derived from the
// same master seed with distinct keys are independent, so per-trial and
// per-sample work can run in any order and still reproduce bit-identically.
// std::uniform_* distributions are deliberately avoided: their output is not
// pinned down by the standard across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  // Derives an independent stream from (master, s1, s2).
  static Rng keyed(std::uint64_t master, std::uint64_t s1, std::uint64_t s2 = 0) {
    std::uint64_t h = finalize(master ^ 0x6A09E667F3BCC909ull);
    h = finalize(h + 0x9E3779B97F4A7C15ull * (s1 + 1));
    h = finalize(h + 0xBF58476D1CE4E5B9ull * (s2 + 1));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return finalize(state_);
  }

  // Uniform in [0, 1), 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  bool bernoulli(double p) { return next_double() < p; }

  int next_sign() { return (next_u64() >> 63) ? 1 : -1; }

 private:
  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace cfn
