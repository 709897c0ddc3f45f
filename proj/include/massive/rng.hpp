#pragma once

#include <cmath>
#include <cstdint>

namespace massive {

// Deterministic, bit-portable generator (splitmix64 core). The standard
// <random> engines are portable but the distributions are not: libstdc++ and
// libc++ produce different normal/binomial streams for the same engine state,
// which would break byte-identical outputs across toolchains. Everything here
// is spelled out so a seed pins the entire stream.
//
// Consumption contract (used when documenting reproducibility):
//   next_u64      : 1 raw step
//   next_double   : 1 raw step
//   next_normal   : 2 raw steps (Box-Muller, sine branch discarded)
//   next_below(n) : >= 1 raw steps (rejection; unbiased)
//   next_binomial : `trials` raw steps
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return scramble(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller. No caching: exactly two uniform draws per
  // call keeps the stream position a pure function of the call count.
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    // Guard u1 == 0 (probability 2^-53, but log(0) would poison the stream).
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n), rejection-debiased.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = ~0ull - ~0ull % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Binomial(trials, p) by explicit Bernoulli summation; trials is tiny here
  // (genotype ploidy), so this is both fast and stream-stable.
  int next_binomial(int trials, double p) {
    int count = 0;
    for (int t = 0; t < trials; ++t) count += next_double() < p ? 1 : 0;
    return count;
  }

  // Derives an independent sub-stream seed, e.g. per replicate or per phase.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    return scramble(seed ^ scramble(stream + 0x9E3779B97F4A7C15ull));
  }

 private:
  static std::uint64_t scramble(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace massive
