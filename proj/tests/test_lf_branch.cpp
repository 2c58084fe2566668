// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <doctest.h>

#include "f2net/grad_check.hpp"
#include "f2net/lf_branch.hpp"
#include "test_util.hpp"

using namespace f2net;
using namespace f2net::testing;

namespace {

LfBranchConfig lf_cfg(int blocks = 2, int patch = 2) {
  LfBranchConfig c;
  c.short_blocks = blocks;
  c.short_channels = 4;
  c.long_layers = 1;
  c.long_heads = 2;
  c.long_dim = 4;
  c.patch_size = patch;
  return c;
}

}  // namespace

TEST_CASE("attention matches the double-loop reference") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    TD q = randn(rng, {4, 8}), k = randn(rng, {4, 8}), v = randn(rng, {4, 8});
    CHECK(max_abs_diff(attention_loops(q, k, v), attention(q, k, v)) < 1e-12);
  }
}

TEST_CASE("attention rows are convex combinations of value rows") {
  std::mt19937_64 rng(2);
  TD q = randn(rng, {6, 3}, 5.0), k = randn(rng, {6, 3}, 5.0);
  // With one-hot value columns the output is the attention matrix itself.
  TD v = TD::zeros({6, 3});
  for (int c = 0; c < 3; ++c) v.mutable_data()[c * 3 + c] = 1.0;
  TD eye6 = TD::zeros({6, 6});
  for (int t = 0; t < 6; ++t) eye6.mutable_data()[t * 6 + t] = 1.0;
  TD q6 = concat<double>({q, TD::zeros({6, 3})}, 1), k6 = concat<double>({k, TD::zeros({6, 3})}, 1);
  TD w = attention(q6, k6, eye6);
  for (int t = 0; t < 6; ++t) {
    double s = 0;
    for (int u = 0; u < 6; ++u) {
      CHECK(w[t * 6 + u] >= 0.0);
      s += w[t * 6 + u];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("attention requires matching shapes") {
  CHECK_THROWS_AS(attention(TD::zeros({3, 2}), TD::zeros({4, 2}), TD::zeros({3, 2})), DimensionError);
}

TEST_CASE("short-range locality is bounded by the receptive radius") {
  ParamStore<double> store;
  Initializer<double> init(3);
  ShortRangeBranch<double> sr(lf_cfg(1), 2, store, init);
  std::mt19937_64 rng(3);
  TD x = randn(rng, {24, 24, 2});
  TD base = sr.forward(x);
  const int radius = sr.receptive_radius();
  // Output (2, 2) is centred on input (4, 4); perturb just outside the radius.
  TD x2 = x.detach();
  x2.mutable_data()[((4 + radius + 1) * 24 + 4) * 2] += 1.0;
  TD far = sr.forward(x2);
  for (int c = 0; c < 4; ++c) CHECK(far[(2 * 12 + 2) * 4 + c] == base[(2 * 12 + 2) * 4 + c]);
  // And inside it the output moves.
  TD x3 = x.detach();
  x3.mutable_data()[((4 + 1) * 24 + 4) * 2] += 1.0;
  TD near = sr.forward(x3);
  double moved = 0;
  for (int c = 0; c < 4; ++c) moved += std::abs(near[(2 * 12 + 2) * 4 + c] - base[(2 * 12 + 2) * 4 + c]);
  CHECK(moved > 0);
}

TEST_CASE("long-range probe: one corner patch reaches the opposite corner") {
  ParamStore<double> store;
  Initializer<double> init(4);
  LongRangeBranch<double> lr(lf_cfg(), 2, 4, store, init);
  std::mt19937_64 rng(4);
  TD x = randn(rng, {8, 8, 2});
  TD base = lr.forward(x);
  TD x2 = x.detach();
  x2.mutable_data()[0] += 1.0;
  TD moved = lr.forward(x2);
  REQUIRE(base.shape() == Shape({4, 4, 4}));
  double d = 0;
  for (int c = 0; c < 4; ++c) d += std::abs(moved[(3 * 4 + 3) * 4 + c] - base[(3 * 4 + 3) * 4 + c]);
  CHECK(d > 1e-8);
}

TEST_CASE("long-range positional table is resampled for other grids") {
  ParamStore<double> store;
  Initializer<double> init(5);
  LongRangeBranch<double> lr(lf_cfg(), 2, 4, store, init);
  std::mt19937_64 rng(5);
  CHECK(lr.forward(randn(rng, {12, 8, 2})).shape() == Shape({6, 4, 4}));
  CHECK_THROWS_AS(lr.forward(randn(rng, {7, 8, 2})), ConfigError);
}

TEST_CASE("short-range branch gradients match finite differences") {
  ParamStore<double> store;
  Initializer<double> init(6);
  ShortRangeBranch<double> sr(lf_cfg(2), 2, store, init);
  std::mt19937_64 rng(6);
  TD x = randn(rng, {6, 6, 2});
  const TD probe = randn(rng, {3, 3, 4});
  std::vector<TD> inputs{x};
  for (const auto& p : store.params()) inputs.push_back(p.value);
  CHECK(grad_check([&] { return sum(mul(sr.forward(x), probe)); }, inputs, 1e-5, 4, 6) < 1e-4);
}

TEST_CASE("long-range branch gradients match finite differences") {
  ParamStore<double> store;
  Initializer<double> init(7);
  LongRangeBranch<double> lr(lf_cfg(), 2, 2, store, init);
  std::mt19937_64 rng(7);
  // The positional table starts at zero; move it off the origin.
  TD pos = randn(rng, lr.position.shape(), 0.3);
  std::copy(pos.data().begin(), pos.data().end(), lr.position.mutable_data().begin());
  TD x = randn(rng, {4, 4, 2});
  const TD probe = randn(rng, {2, 2, 4});
  std::vector<TD> inputs{x};
  for (const auto& p : store.params()) inputs.push_back(p.value);
  CHECK(grad_check([&] { return sum(mul(lr.forward(x), probe)); }, inputs, 1e-5, 4, 7) < 1e-4);
}
