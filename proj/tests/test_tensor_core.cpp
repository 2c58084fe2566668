// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <doctest.h>

#include <numeric>
#include <thread>

#include "f2net/grad_check.hpp"
#include "f2net/ops.hpp"
#include "f2net/parallel.hpp"
#include "test_util.hpp"

using namespace f2net;
using namespace f2net::testing;

TEST_CASE("conv2d matches the nested-loop reference") {
  std::mt19937_64 rng(1);
  for (int stride : {1, 2}) {
    for (int trial = 0; trial < 5; ++trial) {
      TD x = randn(rng, {5, 5, 2}), w = randn(rng, {3, 3, 2, 3}), b = randn(rng, {3});
      TD y = conv2d(x, w, b, stride);
      CHECK(max_abs_diff(conv2d_loops(x, w, b, stride), y) < 1e-12);
    }
  }
}

TEST_CASE("conv2d rejects mismatched channels and names both shapes") {
  std::mt19937_64 rng(2);
  try {
    conv2d(randn(rng, {4, 4, 3}), randn(rng, {3, 3, 2, 1}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string m = e.what();
    CHECK(m.find("4x4x3") != std::string::npos);
    CHECK(m.find("3x3x2x1") != std::string::npos);
  }
}

TEST_CASE("dynamic_depthwise_conv matches the per-pixel loop reference") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    TD x = randn(rng, {6, 6, 3}), k = randn(rng, {6, 6, 9});
    CHECK(max_abs_diff(dwconv_loops(x, k), dynamic_depthwise_conv(x, k)) < 1e-12);
  }
}

TEST_CASE("softmax of [1, 2, 3]") {
  TD s = softmax(TD::from({3}, {1.0, 2.0, 3.0}), 0);
  CHECK(s[0] == doctest::Approx(0.0900).epsilon(1e-3));
  CHECK(s[1] == doctest::Approx(0.2447).epsilon(1e-3));
  CHECK(s[2] == doctest::Approx(0.6652).epsilon(1e-3));
}

TEST_CASE("softmax over the last axis sums to one per row") {
  std::mt19937_64 rng(4);
  TD s = softmax(randn(rng, {4, 5, 7}, 10.0), -1);
  for (int r = 0; r < 20; ++r) {
    double t = 0;
    for (int c = 0; c < 7; ++c) t += s[r * 7 + c];
    CHECK(t == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("layernorm of [1, 3] is [-1, 1]") {
  TD y = layernorm(TD::from({1, 2}, {1.0, 3.0}), TD::full({2}, 1.0), TD::zeros({2}), 1e-12);
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bilinear down then up reproduces a planar field") {
  std::vector<double> v(8 * 8 * 2);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      v[(i * 8 + j) * 2] = 0.3 * i - 0.7 * j + 2.0;
      v[(i * 8 + j) * 2 + 1] = -1.1 * i + 0.2 * j;
    }
  TD x = TD::from({8, 8, 2}, v);
  CHECK(max_abs_diff(bilinear_resize(bilinear_resize(x, 4, 4), 8, 8), x) < 1e-12);
  CHECK(max_abs_diff(bilinear_resize(bilinear_resize(x, 16, 16), 8, 8), x) < 1e-12);
}

TEST_CASE("bilinear resize to the same size is the identity") {
  std::mt19937_64 rng(5);
  TD x = randn(rng, {5, 3, 2});
  CHECK(max_abs_diff(bilinear_resize(x, 5, 3), x) == 0.0);
}

TEST_CASE("directional scan is causal along its direction") {
  std::mt19937_64 rng(6);
  TD gate = sigmoid(randn(rng, {4, 5, 2})), value = randn(rng, {4, 5, 2});
  for (ScanDirection dir : {ScanDirection::RowForward, ScanDirection::RowBackward, ScanDirection::ColForward,
                            ScanDirection::ColBackward}) {
    TD base = directional_scan(gate, value, dir);
    // Perturb (2, 2); earlier positions in scan order must not move.
    TD v2 = value.detach();
    v2.mutable_data()[(2 * 5 + 2) * 2] += 1.0;
    TD moved = directional_scan(gate, v2, dir);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) {
        bool earlier = false;
        switch (dir) {
          case ScanDirection::RowForward: earlier = i == 2 && j < 2; break;
          case ScanDirection::RowBackward: earlier = i == 2 && j > 2; break;
          case ScanDirection::ColForward: earlier = j == 2 && i < 2; break;
          case ScanDirection::ColBackward: earlier = j == 2 && i > 2; break;
        }
        const bool other_line = (dir == ScanDirection::RowForward || dir == ScanDirection::RowBackward) ? i != 2 : j != 2;
        if (earlier || other_line) CHECK(moved[(i * 5 + j) * 2] == base[(i * 5 + j) * 2]);
      }
  }
}

TEST_CASE("cross_entropy matches per-pixel -log p") {
  std::vector<double> l{2.0, 0.5, -1.0, 0.0, 0.0, 0.0, 1.0, 3.0, 0.2, -2.0, 4.0, 1.0};
  std::vector<int> y{0, 2, 1, 1};
  double ref = 0;
  for (int p = 0; p < 4; ++p) {
    double z = 0;
    for (int c = 0; c < 3; ++c) z += std::exp(l[p * 3 + c]);
    ref += -(l[p * 3 + y[p]] - std::log(z));
  }
  CHECK(cross_entropy(TD::from({2, 2, 3}, l), y).item() == doctest::Approx(ref / 4).epsilon(1e-12));
}

TEST_CASE("cross_entropy skips ignored pixels and refuses an all-ignored map") {
  TD l = TD::from({1, 2, 2}, {3.0, 0.0, 0.0, 3.0});
  std::vector<int> y{0, 255};
  CHECK(cross_entropy(l, y, 255).item() == doctest::Approx(std::log1p(std::exp(-3.0))));
  std::vector<int> all{255, 255};
  CHECK_THROWS_AS(cross_entropy(l, all, 255), std::domain_error);
}

TEST_CASE("symmetric_kl of [0.5, 0.5] against [0.9, 0.1]") {
  TD p = TD::from({1, 2}, {0.5, 0.5}), q = TD::from({1, 2}, {0.9, 0.1});
  CHECK(symmetric_kl(p, q).item() == doctest::Approx(0.4394).epsilon(1e-3));
}

TEST_CASE("backward accumulates into leaves across calls") {
  TD x = TD::from({2}, {1.0, 2.0});
  x.set_requires_grad();
  backward(sum(mul(x, x)));
  backward(sum(x));
  CHECK(x.grad()[0] == 3.0);
  CHECK(x.grad()[1] == 5.0);
}

TEST_CASE("no-grad guard stops recording") {
  TD x = TD::from({2}, {1.0, 2.0});
  x.set_requires_grad();
  TD y;
  {
    NoGradGuard g;
    y = mul(x, x);
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(grad_mode_enabled());
}

TEST_CASE("grad_check: sum of squares is exact to 1e-7") {
  std::mt19937_64 rng(7);
  CHECK(grad_check([](const TD& x) { return sum(mul(x, x)); }, randn(rng, {5})) < 1e-7);
}

TEST_CASE("grad_check: composite ops") {
  std::mt19937_64 rng(8);
  const TD w = randn(rng, {3, 3, 2, 3}), k = softmax(randn(rng, {5, 5, 9}), -1), probe = randn(rng, {5, 5, 3});
  const TD gamma = randn(rng, {3}), beta = randn(rng, {3});
  auto f = [&](const TD& x) {
    TD h = dynamic_depthwise_conv(x, k);
    h = gelu(conv2d(h, w));
    h = layernorm(h, gamma, beta, 1e-5);
    return sum(mul(bilinear_resize(softmax(h, -1), 5, 5), probe));
  };
  CHECK(grad_check(f, randn(rng, {5, 5, 2})) < 1e-5);
}

TEST_CASE("grad_check: attention and scan primitives") {
  std::mt19937_64 rng(9);
  const TD kk = randn(rng, {4, 3}), v = randn(rng, {4, 3}), probe = randn(rng, {4, 3});
  auto attn = [&](const TD& q) {
    TD s = softmax(scale(matmul(q, transpose(kk)), 1.0 / std::sqrt(3.0)), 1);
    return sum(mul(matmul(s, v), probe));
  };
  CHECK(grad_check(attn, randn(rng, {4, 3})) < 1e-5);
  const TD value = randn(rng, {3, 4, 2}), p2 = randn(rng, {3, 4, 2});
  auto scan = [&](const TD& g) { return sum(mul(directional_scan(sigmoid(g), value, ScanDirection::ColBackward), p2)); };
  CHECK(grad_check(scan, randn(rng, {3, 4, 2})) < 1e-5);
}

TEST_CASE("grad_check: five-point stencil agrees on a smooth function") {
  std::mt19937_64 rng(10);
  auto f = [](const TD& x) { return sum(gelu(mul(x, x))); };
  CHECK(grad_check(f, randn(rng, {6}), 1e-3, Stencil::FivePoint) < 1e-8);
}

TEST_CASE("kernels are bit-identical across thread counts") {
  std::mt19937_64 rng(11);
  TD x = randn(rng, {33, 17, 4}), w = randn(rng, {3, 3, 4, 5}), k = randn(rng, {33, 17, 9});
  set_num_threads(1);
  TD a = conv2d(x, w), c = dynamic_depthwise_conv(x, k);
  set_num_threads(4);
  TD b = conv2d(x, w), d = dynamic_depthwise_conv(x, k);
  set_num_threads(1);
  CHECK(max_abs_diff(a, b) == 0.0);
  CHECK(max_abs_diff(c, d) == 0.0);
}

TEST_CASE("thread count resolution falls back to 1") {
  CHECK(resolve_thread_count(3) == 3);
  CHECK(resolve_thread_count(0) >= 1);
}
