#pragma once

#include <cmath>
#include <cstdint>

namespace dgrd {

// Deterministic xoshiro256++ generator. Implemented in-repo (rather than via
// <random> distributions) so that streams are bit-reproducible across
// standard-library versions; seeds and results are part of persisted
// artifacts.
class Rng {
 public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  // Independent substream: mixes (seed, stream) before state expansion.
  Rng(uint64_t seed, uint64_t stream) {
    uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    reseed(splitmix(x));
  }

  void reseed(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix(x);
  }

  uint64_t next() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Unbiased integer in [0, bound). bound must be nonzero.
  uint64_t uniform_u64(uint64_t bound) {
    const uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform_u64(static_cast<uint64_t>(hi - lo) + 1));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1]; safe as a log() argument.
  double uniform01_open_left() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  // Geometric offset with support {0, 1, 2, ...} and P(k) = gamma^k (1-gamma),
  // i.e. success rate 1-gamma. Inverse-CDF: floor(log u / log gamma).
  uint64_t geometric_from_gamma(double gamma) {
    const double u = uniform01_open_left();
    const double k = std::floor(std::log(u) / std::log(gamma));
    return k < 0.0 ? 0 : static_cast<uint64_t>(k);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t state_[4];
};

}  // namespace dgrd
