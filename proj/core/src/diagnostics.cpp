// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include "nqs/diagnostics.hpp"

#include <atomic>
#include <iostream>
#include <map>
#include <mutex>
#include <string>

namespace nqs::diagnostics {
namespace {

std::atomic<bool> g_quiet{false};
std::atomic<std::size_t> g_count{0};
std::mutex g_mutex;
std::map<std::string, std::size_t, std::less<>> g_per_topic;

}  // namespace

void warn(std::string_view topic, std::string_view message) {
  g_count.fetch_add(1, std::memory_order_relaxed);
  if (g_quiet.load(std::memory_order_relaxed)) return;
  std::lock_guard lock(g_mutex);
  auto it = g_per_topic.find(topic);
  if (it == g_per_topic.end()) it = g_per_topic.emplace(std::string(topic), 0).first;
  const std::size_t seen = ++it->second;
  if (seen > kRepeatLimit) return;
  std::clog << "warning: " << topic << ": " << message << '\n';
  if (seen == kRepeatLimit) std::clog << "warning: " << topic << ": further warnings of this kind suppressed\n";
}

void set_quiet(bool quiet) { g_quiet.store(quiet, std::memory_order_relaxed); }

std::size_t warning_count() { return g_count.load(std::memory_order_relaxed); }

}  // namespace nqs::diagnostics
