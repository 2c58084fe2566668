// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <doctest.h>

#include "f2net/grad_check.hpp"
#include "f2net/hff_fusion.hpp"
#include "test_util.hpp"

using namespace f2net;
using namespace f2net::testing;

namespace {

void randomise(Mlp<double>& m, std::mt19937_64& rng) {
  for (TD* t : {&m.weight1, &m.bias1, &m.weight2, &m.bias2}) {
    TD r = randn(rng, t->shape(), 0.5);
    std::copy(r.data().begin(), r.data().end(), t->mutable_data().begin());
  }
}

// Comparison fusers that the production path does not ship.
TD add_fuser(const TD& a, const TD& b) { return add(a, b); }
TD concat_fuser(const TD& a, const TD& b, const TD& w) { return conv2d(concat<double>({a, b}, 2), w); }

}  // namespace

TEST_CASE("channel_attention is sigmoid of the MLP of the pooled features") {
  ParamStore<double> store;
  Initializer<double> init(1);
  HybridFrequencyFusion<double> h(6, 4, 2, store, init, "f");
  std::mt19937_64 rng(1);
  TD f = randn(rng, {5, 4, 6});
  std::vector<double> pooled(6, 0.0);
  for (int p = 0; p < 20; ++p)
    for (int c = 0; c < 6; ++c) pooled[c] += f[p * 6 + c] / 20;
  TD ref = sigmoid(h.attention_a(TD::from({6}, pooled)));
  CHECK(max_abs_diff(channel_attention(f, h.attention_a), ref) < 1e-14);
}

TEST_CASE("cross_branch_matrix of [1] and [1] is sigmoid(1)") {
  TD m = cross_branch_matrix(TD::from({1}, {1.0}), TD::from({1}, {1.0}));
  CHECK(m[0] == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("attention entries stay strictly inside (0, 1)") {
  ParamStore<double> store;
  Initializer<double> init(2);
  HybridFrequencyFusion<double> h(4, 3, 2, store, init, "f");
  std::mt19937_64 rng(2);
  randomise(h.refine_a, rng);
  randomise(h.refine_b, rng);
  auto t = h.trace(randn(rng, {3, 3, 4}), randn(rng, {3, 3, 3}));
  for (const TD* x : {&t.attn_a, &t.attn_b, &t.matrix, &t.refined_a, &t.refined_b})
    for (double v : x->data()) CHECK((v > 0.0 && v < 1.0));
  for (double v : t.matrix.data()) CHECK(v > 0.5);
}

TEST_CASE("refine_attentions matches the composition of its parts") {
  ParamStore<double> store;
  Initializer<double> init(3);
  HybridFrequencyFusion<double> h(3, 5, 1, store, init, "f");
  std::mt19937_64 rng(3);
  randomise(h.refine_a, rng);
  randomise(h.refine_b, rng);
  TD a = sigmoid(randn(rng, {3})), b = sigmoid(randn(rng, {5}));
  TD m = cross_branch_matrix(a, b);
  auto [ra, rb] = refine_attentions(m, a, b, h.refine_a, h.refine_b);
  TD flat = reshape(m, {15});
  TD ha = linear(gelu(linear(flat, h.refine_a.weight1, h.refine_a.bias1)), h.refine_a.weight2, h.refine_a.bias2);
  TD hb = linear(gelu(linear(flat, h.refine_b.weight1, h.refine_b.bias1)), h.refine_b.weight2, h.refine_b.bias2);
  CHECK(max_abs_diff(ra, sigmoid(add(ha, a))) < 1e-14);
  CHECK(max_abs_diff(rb, sigmoid(add(hb, b))) < 1e-14);
  CHECK(h.refine_a.weight2.dim(1) == 3);
  CHECK(h.refine_b.weight2.dim(1) == 5);
}

TEST_CASE("fusion widths default to the larger input width") {
  ParamStore<double> store;
  Initializer<double> init(4);
  HybridFrequencyFusion<double> h(6, 4, 2, store, init, "f");
  CHECK(h.out_channels() == 6);
  std::mt19937_64 rng(4);
  CHECK(h.fuse(randn(rng, {3, 2, 6}), randn(rng, {3, 2, 4})).shape() == Shape({3, 2, 6}));
  CHECK_THROWS_AS(h.fuse(randn(rng, {3, 2, 6}), randn(rng, {2, 2, 4})), DimensionError);
  CHECK_THROWS_AS(h.fuse(randn(rng, {3, 2, 5}), randn(rng, {3, 2, 4})), DimensionError);
}

TEST_CASE("saturated fusion with identity alignment is the Add fuser") {
  ParamStore<double> store;
  Initializer<double> init(5);
  HybridFrequencyFusion<double> h(4, 4, 2, store, init, "f");
  fill(h.refine_a.bias2, 60.0);
  fill(h.refine_b.bias2, 60.0);
  for (TD* w : {&h.align_a_weight, &h.align_b_weight}) {
    fill(*w, 0.0);
    for (int c = 0; c < 4; ++c) w->mutable_data()[c * 4 + c] = 1.0;
  }
  std::mt19937_64 rng(5);
  TD a = randn(rng, {5, 5, 4}), b = randn(rng, {5, 5, 4});
  CHECK(max_abs_diff(h.fuse(a, b), add_fuser(a, b)) < 1e-5);
  // Concat followed by a split identity conv is the same baseline.
  TD w = TD::zeros({1, 1, 8, 4});
  for (int c = 0; c < 4; ++c) {
    w.mutable_data()[c * 4 + c] = 1.0;
    w.mutable_data()[(4 + c) * 4 + c] = 1.0;
  }
  CHECK(max_abs_diff(concat_fuser(a, b, w), add_fuser(a, b)) < 1e-12);
}

TEST_CASE("full fusion path gradients match finite differences") {
  ParamStore<double> store;
  Initializer<double> init(6);
  HybridFrequencyFusion<double> h(4, 3, 2, store, init, "f");
  std::mt19937_64 rng(6);
  randomise(h.refine_a, rng);
  randomise(h.refine_b, rng);
  TD a = randn(rng, {3, 3, 4}), b = randn(rng, {3, 3, 3});
  const TD probe = randn(rng, {3, 3, 4});
  std::vector<TD> inputs{a, b};
  for (const auto& p : store.params()) inputs.push_back(p.value);
  CHECK(grad_check([&] { return sum(mul(h.fuse(a, b), probe)); }, inputs) < 1e-4);
}
