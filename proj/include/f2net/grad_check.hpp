// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "f2net/tensor.hpp"

namespace f2net {

enum class Stencil {
  Central,   // (f(x+e) - f(x-e)) / 2e
  FivePoint  // (8[f(x+e) - f(x-e)] - [f(x+2e) - f(x-2e)]) / 12e
};

/// Finite-difference gradient check in 64-bit. Returns
///   max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1e-8).
double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                  Tensor<double> x, double eps = 1e-5, Stencil stencil = Stencil::Central);

/// Multi-input form: `f` closes over `inputs` (typically parameters) and is
/// re-evaluated while each probed component is perturbed in place. When
/// `max_per_tensor` is non-zero, that many components per tensor are probed,
/// chosen by a seeded shuffle; otherwise every component is.
double grad_check(const std::function<Tensor<double>()>& f, const std::vector<Tensor<double>>& inputs,
                  double eps = 1e-5, std::size_t max_per_tensor = 0, std::uint64_t seed = 0,
                  Stencil stencil = Stencil::Central);

}  // namespace f2net
