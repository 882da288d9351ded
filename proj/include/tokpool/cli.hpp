// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tokpool::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kVerificationFailed = 3,
};

/// Runs one invocation. `args` excludes the program name. Results go to
/// `out` (or the files named by flags), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tokpool::cli
