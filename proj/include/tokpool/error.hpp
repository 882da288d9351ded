// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tokpool {

/// Caller asked for something the contract does not allow (bad flag, k < 1,
/// missing weights for a weighted method). CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Input data is malformed or numerically invalid (NaN, bad magic, shape
/// mismatch). CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tokpool
