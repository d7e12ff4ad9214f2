// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "nqs/ansatz.hpp"
#include "nqs/rng.hpp"

namespace nqs {

/// Binary parameter snapshot, little-endian throughout:
///
///   "NQSP" | u32 version (1) | u32 len + architecture descriptor |
///   u32 len + lattice descriptor | u64 n_init | u64 ones | u64 config hash |
///   u64 iteration | u64 rng key | u64 rng counter | n_init x f64 theta |
///   ceil(n_init / 8) bytes mask (LSB first) | u64 FNV-1a of all prior bytes
struct Checkpoint {
  std::string architecture;
  std::string lattice;
  std::uint64_t config_hash = 0;
  std::uint64_t iteration = 0;
  RngStream rng;
  ParameterVector theta;
  Mask mask;

  static Checkpoint of(const MaskedAnsatz& ansatz, std::uint64_t config_hash, std::uint64_t iteration,
                       RngStream rng = {});
  MaskedAnsatz ansatz() const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Throws CheckpointError on truncation, bad magic/version or checksum mismatch.
Checkpoint decode_checkpoint(const std::string& bytes);

/// Writes to a temporary sibling and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace nqs
