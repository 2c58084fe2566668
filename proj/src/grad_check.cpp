// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace f2net {

double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, Tensor<double> x,
                  double eps, Stencil stencil) {
  return grad_check([&] { return f(x); }, {x}, eps, 0, 0, stencil);
}

double grad_check(const std::function<Tensor<double>()>& f, const std::vector<Tensor<double>>& inputs,
                  double eps, std::size_t max_per_tensor, std::uint64_t seed, Stencil stencil) {
  std::vector<Tensor<double>> xs = inputs;
  std::vector<bool> had_flag;
  for (auto& x : xs) {
    had_flag.push_back(x.requires_grad());
    x.set_requires_grad(true);
    x.zero_grad();
  }
  backward(f());
  std::vector<std::vector<double>> analytic;
  for (auto& x : xs) analytic.emplace_back(x.grad().begin(), x.grad().end());

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  NoGradGuard no_grad;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    auto data = xs[t].mutable_data();
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (max_per_tensor && idx.size() > max_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_tensor);
    }
    for (std::size_t i : idx) {
      const double orig = data[i];
      auto at = [&](double offset) {
        data[i] = orig + offset;
        return f().item();
      };
      double numeric = 0;
      if (stencil == Stencil::Central) {
        numeric = (at(eps) - at(-eps)) / (2 * eps);
      } else {
        // O(eps^4) truncation lets eps stay large enough that cancellation
        // noise in f is negligible.
        numeric = (8 * (at(eps) - at(-eps)) - (at(2 * eps) - at(-2 * eps))) / (12 * eps);
      }
      data[i] = orig;
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (std::size_t t = 0; t < xs.size(); ++t) xs[t].set_requires_grad(had_flag[t]);
  return worst;
}

}  // namespace f2net
