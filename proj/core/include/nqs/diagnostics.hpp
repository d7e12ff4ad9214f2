// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

namespace nqs::diagnostics {

/// Writes "warning: <topic>: <message>" to stderr unless warnings are silenced.
/// Each topic is printed at most kRepeatLimit times; later ones are only counted.
void warn(std::string_view topic, std::string_view message);

inline constexpr std::size_t kRepeatLimit = 5;

/// Silences (or re-enables) warnings; tests use this to keep logs quiet.
void set_quiet(bool quiet);

/// Number of warnings emitted since process start (counted even when quiet).
std::size_t warning_count();

}  // namespace nqs::diagnostics
