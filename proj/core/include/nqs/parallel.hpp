// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace nqs {

/// Thread count from the NQS_THREADS environment variable, or `fallback`.
std::size_t threads_from_environment(std::size_t fallback);

/// Runs body(i) for i in [0, n) on up to `threads` workers with static
/// contiguous chunking. Each index is processed exactly once; results written
/// by index are therefore independent of the thread count. The first
/// exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace nqs
