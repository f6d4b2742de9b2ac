#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace reflex {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// A (seed, stream) pair names an independent 2^128-long sequence, so Monte
// Carlo trials can draw from per-trial streams and stay reproducible no
// matter how work is scheduled across threads.
class Philox4x32 {
 public:
  explicit Philox4x32(uint64_t seed, uint64_t stream = 0) {
    key_[0] = static_cast<uint32_t>(seed);
    key_[1] = static_cast<uint32_t>(seed >> 32);
    counter_ = {0, 0, static_cast<uint32_t>(stream),
                static_cast<uint32_t>(stream >> 32)};
    pos_ = 4;
  }

  uint32_t next_u32() {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  uint64_t next_u64() {
    uint64_t lo = next_u32();
    uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // +1 or -1 with equal probability.
  int next_sign() { return (next_u32() & 1u) ? 1 : -1; }

  // Uniform integer in [0, bound) by rejection (no modulo bias).
  uint64_t next_below(uint64_t bound) {
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Raw block function, exposed for known-answer tests.
  static std::array<uint32_t, 4> block(std::array<uint32_t, 4> counter,
                                       std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      counter = single_round(counter, key);
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return counter;
  }

 private:
  static std::array<uint32_t, 4> single_round(
      const std::array<uint32_t, 4>& ctr, const std::array<uint32_t, 2>& key) {
    const uint64_t p0 = uint64_t{0xD2511F53u} * ctr[0];
    const uint64_t p1 = uint64_t{0xCD9E8D57u} * ctr[2];
    const auto hi0 = static_cast<uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<uint32_t>(p0);
    const auto hi1 = static_cast<uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }

  void refill() {
    block_ = block(counter_, key_);
    pos_ = 0;
    // 64-bit increment within the stream half of the counter.
    if (++counter_[0] == 0) ++counter_[1];
  }

  std::array<uint32_t, 2> key_{};
  std::array<uint32_t, 4> counter_{};
  std::array<uint32_t, 4> block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace reflex
