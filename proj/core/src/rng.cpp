// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/rng.hpp"

#include <cmath>
#include <numbers>

#include "nqs/error.hpp"

namespace nqs {

RngStream RngStream::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = mix(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t id : path) key = mix(key ^ mix(id + 0x3c6ef372fe94f82bULL));
  return RngStream(key, 0);
}

__extension__ typedef unsigned __int128 uint128;

std::uint64_t RngStream::below(std::uint64_t n) {
  NQS_EXPECT(n > 0, "empty range");
  // Lemire's multiply-shift with rejection of the biased low zone.
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const uint128 m = static_cast<uint128>((*this)()) * n;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
  }
}

double RngStream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace nqs
