// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace f2net {

struct SelftestReport {
  int passed = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Runs the built-in contract examples (closed-form and degenerate cases of
/// every module) and logs one line per case to `log` when non-null.
SelftestReport run_selftest(std::ostream* log = nullptr);

}  // namespace f2net
