// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <doctest.h>

#include "f2net/afd.hpp"
#include "f2net/grad_check.hpp"
#include "test_util.hpp"

using namespace f2net;
using namespace f2net::testing;

namespace {

struct Afd {
  ParamStore<double> store;
  Initializer<double> init;
  FrequencyDecomposer<double> afd;
  Afd(int in, int d, int groups, std::uint64_t seed, HighpassMode mode = HighpassMode::Identity)
      : init(seed), afd(make_cfg(d, groups, mode), in, store, init) {}
  static AfdConfig make_cfg(int d, int groups, HighpassMode mode) {
    AfdConfig c;
    c.embed_dim = d;
    c.groups = groups;
    c.highpass_mode = mode;
    return c;
  }
};

}  // namespace

TEST_CASE("stem matches a per-pixel matrix product") {
  Afd a(3, 6, 2, 1);
  std::mt19937_64 rng(1);
  TD x = randn(rng, {4, 5, 3});
  TD y = a.afd.stem(x);
  for (int p = 0; p < 20; ++p)
    for (int o = 0; o < 6; ++o) {
      double s = a.afd.stem_bias[o];
      for (int c = 0; c < 3; ++c) s += x[p * 3 + c] * a.afd.stem_weight[c * 6 + o];
      CHECK(y[p * 6 + o] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("build_lowpass_kernels is softmax of the generator convolution") {
  Afd a(3, 8, 4, 2);
  std::mt19937_64 rng(2);
  TD g = randn(rng, {5, 5, 2});
  for (int grp = 0; grp < 4; ++grp) {
    TD ref = softmax(conv2d(g, a.afd.generator_weight[grp], a.afd.generator_bias[grp]), -1);
    CHECK(max_abs_diff(a.afd.build_lowpass_kernels(g, grp), ref) < 1e-14);
  }
}

TEST_CASE("decompose reconstructs and matches a per-pixel window oracle") {
  Afd a(3, 8, 4, 3);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    TD x = randn(rng, {8, 8, 8});
    FrequencyPair<double> fp = a.afd.decompose(x);
    CHECK(max_abs_diff(add(fp.lf, fp.hf), x) < 1e-12);
    // Each group's low-pass output is the window sum with that group's kernels.
    for (int grp = 0; grp < 4; ++grp) {
      TD xs = slice(x, 2, grp * 2, grp * 2 + 2);
      TD kernels = a.afd.build_lowpass_kernels(xs, grp);
      auto ref = dwconv_loops(xs, kernels);
      TD got = slice(fp.lf, 2, grp * 2, grp * 2 + 2);
      CHECK(max_abs_diff(ref, got) < 1e-12);
    }
  }
}

TEST_CASE("low-pass kernels lie on the simplex and high-pass kernels sum to zero") {
  Afd a(3, 8, 2, 4);
  std::mt19937_64 rng(4);
  FrequencyPair<double> fp = a.afd.decompose(randn(rng, {6, 7, 8}, 4.0));
  for (std::size_t g = 0; g < fp.lowpass_kernels.size(); ++g) {
    const TD& lp = fp.lowpass_kernels[g];
    const TD& hp = fp.highpass_kernels[g];
    for (int p = 0; p < 42; ++p) {
      double sl = 0, sh = 0;
      for (int t = 0; t < 9; ++t) {
        CHECK(lp[p * 9 + t] >= 0.0);
        sl += lp[p * 9 + t];
        sh += hp[p * 9 + t];
      }
      CHECK(sl == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(sh) < 1e-12);
    }
  }
}

TEST_CASE("high-pass of a constant map is zero") {
  Afd a(3, 4, 2, 5);
  FrequencyPair<double> fp = a.afd.decompose(TD::full({5, 5, 4}, -3.0));
  for (double v : fp.hf.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("all-ones high-pass mode is kept for comparison") {
  TD hp = derive_highpass_kernels(TD::full({1, 1, 9}, 1.0 / 9), HighpassMode::AllOnes);
  for (int t = 0; t < 9; ++t) CHECK(hp[t] == doctest::Approx(8.0 / 9));
}

TEST_CASE("groups must divide embed_dim") {
  ParamStore<double> store;
  Initializer<double> init(1);
  AfdConfig c;
  c.embed_dim = 32;
  c.groups = 5;
  CHECK_THROWS_AS(FrequencyDecomposer<double>(c, 3, store, init), ConfigError);
}

TEST_CASE("downsample_lf samples a planar field exactly") {
  std::vector<double> v(8 * 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) v[i * 8 + j] = 0.5 * i + 0.25 * j - 1;
  TD y = downsample_lf(TD::from({8, 8, 1}, v), 2);
  REQUIRE(y.shape() == Shape({4, 4, 1}));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      // Output pixel (i, j) sits at input coordinate (2i + 0.5, 2j + 0.5).
      CHECK(y[i * 4 + j] == doctest::Approx(0.5 * (2 * i + 0.5) + 0.25 * (2 * j + 0.5) - 1).epsilon(1e-12));
    }
}

TEST_CASE("downsample_lf rejects bad factors") {
  CHECK_THROWS_AS(downsample_lf(TD::zeros({6, 8, 1}), 4), ConfigError);
  CHECK_THROWS_AS(downsample_lf(TD::zeros({8, 8, 1}), 0), ConfigError);
}

TEST_CASE("permuting channels inside one group leaves other groups bit-identical") {
  Afd a(3, 8, 4, 7);
  std::mt19937_64 rng(7);
  TD x = randn(rng, {5, 5, 8});
  std::vector<double> v = as_vector(x);
  for (int p = 0; p < 25; ++p) std::swap(v[p * 8 + 2], v[p * 8 + 3]);  // group 1
  FrequencyPair<double> base = a.afd.decompose(x), perm = a.afd.decompose(TD::from({5, 5, 8}, v));
  for (int p = 0; p < 25; ++p)
    for (int c = 0; c < 8; ++c) {
      if (c == 2 || c == 3) continue;
      CHECK(base.lf[p * 8 + c] == perm.lf[p * 8 + c]);
      CHECK(base.hf[p * 8 + c] == perm.hf[p * 8 + c]);
    }
}

TEST_CASE("decompose gradients match finite differences") {
  Afd a(3, 4, 2, 6);
  std::mt19937_64 rng(6);
  const TD probe_l = randn(rng, {5, 5, 4}), probe_h = randn(rng, {5, 5, 4});
  std::vector<TD> inputs{a.afd.stem_weight, a.afd.generator_weight[0], a.afd.generator_bias[1]};
  TD img = randn(rng, {5, 5, 3});
  auto f = [&] {
    FrequencyPair<double> fp = a.afd.decompose(a.afd.stem(img));
    return add(sum(mul(fp.lf, probe_l)), sum(mul(fp.hf, probe_h)));
  };
  CHECK(grad_check(f, inputs) < 1e-5);
}
