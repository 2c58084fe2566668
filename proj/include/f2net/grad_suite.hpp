// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// The 64-bit finite-difference suite behind `f2net gradcheck`: every
// differentiable primitive, each module's forward, and the full model.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "f2net/config.hpp"

namespace f2net {

struct GradCheckEntry {
  std::string module;
  std::string name;
  double max_rel_error = 0;
};

/// Module names in suite order.
const std::vector<std::string>& grad_suite_modules();

/// Runs the checks of `module` (all modules when empty). The end-to-end check
/// uses `cfg` on a 16x16 input and probes `model_samples` components per
/// parameter tensor. Throws std::invalid_argument for an unknown module.
std::vector<GradCheckEntry> run_grad_suite(const F2NetConfig& cfg, std::uint64_t seed,
                                           const std::string& module = "", std::size_t model_samples = 3);

}  // namespace f2net
