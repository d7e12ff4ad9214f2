// Copyright 2026 The nqs-prune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nqs {

/// Caller broke a documented precondition (bad index, mismatched sizes, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A computation produced a non-finite value or failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem size exceeds what an exact method can handle.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid combination of user-facing settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void contract_failure(const std::string& what) { throw ContractViolation(what); }

}  // namespace detail

#define NQS_EXPECT(cond, msg)                                                     \
  do {                                                                            \
    if (!(cond)) ::nqs::detail::contract_failure(std::string(__func__) + ": " + (msg)); \
  } while (false)

}  // namespace nqs
