#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "specref/core.hpp"

namespace specref {

// Philox4x32-10 counter-based generator. Streams are addressed by
// (seed, stream, counter), so draws are reproducible regardless of
// evaluation order; datasets built in parallel stay bit-identical.
class Philox {
 public:
  Philox(uint64_t seed, uint64_t stream) : key0_(seed), key1_(stream) {}

  // Four 32-bit words for block index `ctr`.
  void block(uint64_t ctr, uint32_t out[4]) const {
    uint32_t c0 = static_cast<uint32_t>(ctr);
    uint32_t c1 = static_cast<uint32_t>(ctr >> 32);
    uint32_t c2 = static_cast<uint32_t>(key1_);
    uint32_t c3 = static_cast<uint32_t>(key1_ >> 32);
    uint32_t k0 = static_cast<uint32_t>(key0_);
    uint32_t k1 = static_cast<uint32_t>(key0_ >> 32);
    for (int round = 0; round < 10; ++round) {
      uint64_t p0 = 0xD2511F53ull * c0;
      uint64_t p1 = 0xCD9E8D57ull * c2;
      uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
      uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
      uint32_t n0 = hi1 ^ c1 ^ k0;
      uint32_t n1 = lo1;
      uint32_t n2 = hi0 ^ c3 ^ k1;
      uint32_t n3 = lo0;
      c0 = n0; c1 = n1; c2 = n2; c3 = n3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    out[0] = c0; out[1] = c1; out[2] = c2; out[3] = c3;
  }

  // j-th u64 of the stream.
  uint64_t u64_at(uint64_t j) const {
    uint32_t w[4];
    block(j >> 1, w);
    return (j & 1) ? ((static_cast<uint64_t>(w[2]) << 32) | w[3])
                   : ((static_cast<uint64_t>(w[0]) << 32) | w[1]);
  }

  // Uniform double in [0,1), 53-bit resolution.
  double uniform_at(uint64_t j) const {
    return static_cast<double>(u64_at(j) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; index j selects an independent draw.
  double gaussian_at(uint64_t j) const {
    return gaussian_pair_at(j).first;
  }

  // Independent gaussian pair (used for complex mode amplitudes).
  std::pair<double, double> gaussian_pair_at(uint64_t j) const {
    double u1 = uniform_at(2 * j);
    double u2 = uniform_at(2 * j + 1);
    double r = std::sqrt(-2.0 * std::log1p(u1 - 1.0 + 0x1.0p-53));  // keeps u1 > 0
    return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
  }

 private:
  uint64_t key0_, key1_;
};

// Sequential convenience wrapper over the counter interface.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0) : gen_(seed, stream) {}
  double uniform() { return gen_.uniform_at(pos_++); }
  double gaussian() { return gen_.gaussian_at(pos_++); }
  uint64_t u64() { return gen_.u64_at(pos_++); }

 private:
  Philox gen_;
  uint64_t pos_ = 0;
};

// SplitMix64 step: derives sub-seeds (per trajectory, per parameter tensor).
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace specref
