// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams (Philox4x32-10). A stream is addressed by
// (master_seed, stream_index); the n-th draw of a stream depends only on
// those two values and n, so Monte-Carlo trials can be scheduled on any
// worker without changing their samples.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace bstoa {

/// Philox4x32 with 10 rounds, as published with Random123.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9;
  static constexpr std::uint32_t kW1 = 0xBB67AE85;
};

/// One independent random stream. Satisfies UniformRandomBitGenerator.
///
/// Key = master_seed, counter = (stream_index, block). Each block yields
/// four 32-bit words; normals are produced in pairs by Box-Muller so the
/// sequence is identical on every platform.
class Rng {
 public:
  using result_type = std::uint32_t;

  Rng(std::uint64_t master_seed, std::uint64_t stream_index)
      : master_seed_(master_seed), stream_index_(stream_index) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (word_ == 4) refill();
    return buffer_[word_++];
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  void refill() {
    const Philox4x32::Counter ctr = {
        static_cast<std::uint32_t>(stream_index_), static_cast<std::uint32_t>(stream_index_ >> 32),
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32)};
    const Philox4x32::Key key = {static_cast<std::uint32_t>(master_seed_),
                                 static_cast<std::uint32_t>(master_seed_ >> 32)};
    buffer_ = Philox4x32::generate(ctr, key);
    ++block_;
    word_ = 0;
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int word_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bstoa
