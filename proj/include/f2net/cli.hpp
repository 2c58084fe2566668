// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// The `f2net` command line: gen-data, decompose, train, eval, predict,
// gradcheck and selftest. Exit codes are 0 on success, 1 on a usage or
// configuration error, 2 on a runtime failure.

#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace f2net {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Bad flags, missing inputs the user named, or inconsistent options.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace f2net
