// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace nqs {

/// Counter-based random stream. The full state is (key, counter), so a stream
/// can be checkpointed and restored exactly, and independent streams are
/// obtained by deriving keys instead of sharing a generator across threads.
///
/// Output i is the SplitMix64 finalizer applied to key + (i + 1) * golden.
class RngStream {
 public:
  using result_type = std::uint64_t;

  constexpr RngStream() = default;
  constexpr explicit RngStream(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  /// Stream keyed by hashing a seed together with a path of stream identifiers
  /// (e.g. {phase, iteration, chain}).
  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal draw (Box-Muller, no cached second value).
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Well-known stream identifiers used when deriving per-purpose streams.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kPretrain = 2;
inline constexpr std::uint64_t kIteration = 3;
inline constexpr std::uint64_t kPruneSelect = 4;
inline constexpr std::uint64_t kEvaluate = 5;
inline constexpr std::uint64_t kTicket = 6;
inline constexpr std::uint64_t kChain = 7;
inline constexpr std::uint64_t kFidelity = 8;
}  // namespace stream

}  // namespace nqs
