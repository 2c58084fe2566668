// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <doctest.h>

#include <sstream>

#include "f2net/objectives.hpp"
#include "test_util.hpp"

using namespace f2net;
using namespace f2net::testing;

TEST_CASE("symmetric KL matches the double loop on random maps") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    TD p = softmax(randn(rng, {4, 4, 3}), -1), q = softmax(randn(rng, {4, 4, 3}), -1);
    CHECK(cfal(p, q).item() == doctest::Approx(symmetric_kl_loops(p, q)).epsilon(1e-9));
  }
}

TEST_CASE("cfal is non-negative and vanishes only on equal distributions") {
  std::mt19937_64 rng(2);
  TD p = softmax(randn(rng, {3, 3, 4}), -1), q = softmax(randn(rng, {3, 3, 4}), -1);
  CHECK(cfal(p, q).item() > 0);
  CHECK(cfal(p, p).item() == doctest::Approx(0.0));
}

TEST_CASE("feature_to_distribution projects, resizes, then normalises") {
  std::mt19937_64 rng(3);
  TD f = randn(rng, {3, 3, 5}), proj = randn(rng, {1, 1, 5, 4});
  TD ref = softmax(bilinear_resize(conv2d(f, proj), 6, 6), -1);
  CHECK(max_abs_diff(feature_to_distribution(f, proj, 6, 6), ref) < 1e-14);
}

TEST_CASE("cfbl of {1, 2, 3} is 2") {
  BranchNorms n{{BranchTag::HighFreq, 1.0}, {BranchTag::ShortRange, 2.0}, {BranchTag::LongRange, 3.0}};
  CHECK(mean_norm(n) == doctest::Approx(2.0));
  CHECK(cfbl(n) == doctest::Approx(2.0));
  CHECK(cfbl({}) == 0.0);
}

TEST_CASE("total_loss with unit weights sums the components") {
  LossReport r = total_loss(0.5, 0.2, 0.3, LossWeights{1.0, 1.0, 1.0});
  CHECK(r.total == doctest::Approx(1.0));
  BranchNorms n{{BranchTag::HighFreq, 1.0}, {BranchTag::LongRange, 4.0}};
  LossReport r2 = total_loss(1.0, 0.0, cfbl(n), LossWeights{}, n);
  CHECK(r2.mean_grad_norm == doctest::Approx(2.5));
  CHECK(r2.total == doctest::Approx(0.1 * 3.0 + 1.0));
}

TEST_CASE("branch_grad_norms matches a finite-difference gradient norm") {
  ParamStore<double> store;
  std::mt19937_64 rng(4);
  TD a = store.add("highfreq/w", BranchTag::HighFreq, randn(rng, {3, 2}));
  TD b = store.add("shortrange/w", BranchTag::ShortRange, randn(rng, {3, 2}));
  TD head = store.add("head/w", BranchTag::Head, randn(rng, {2, 3}));
  TD x = randn(rng, {5, 3});
  std::vector<int> labels{0, 1, 2, 1, 0};
  auto loss = [&] {
    TD h = add(gelu(linear(x, a)), sigmoid(linear(x, b)));
    return ce_loss(reshape(linear(h, head), {5, 1, 3}), labels);
  };
  // Pre-existing gradients must survive the probe.
  head.mutable_grad()[0] = 7.0;
  BranchNorms g = branch_grad_norms(loss(), store);
  CHECK(head.grad()[0] == 7.0);
  CHECK(g.size() == 2);
  for (auto [tensor, tag] : {std::pair{a, BranchTag::HighFreq}, std::pair{b, BranchTag::ShortRange}}) {
    double sq = 0;
    const double eps = 1e-6;
    for (std::size_t i = 0; i < tensor.numel(); ++i) {
      TD t = tensor;
      const double v = t[i];
      t.mutable_data()[i] = v + eps;
      const double up = loss().item();
      t.mutable_data()[i] = v - eps;
      const double dn = loss().item();
      t.mutable_data()[i] = v;
      const double d = (up - dn) / (2 * eps);
      sq += d * d;
    }
    CHECK(g.at(tag) == doctest::Approx(std::sqrt(sq)).epsilon(1e-3));
  }
}

TEST_CASE("collect_branch_norms scales and skips empty tags") {
  ParamStore<double> store;
  TD a = store.add("highfreq/w", BranchTag::HighFreq, TD::from({2}, {0.0, 0.0}));
  a.mutable_grad()[0] = 3.0;
  a.mutable_grad()[1] = 4.0;
  BranchNorms n = collect_branch_norms(store, 2.0);
  CHECK(n.at(BranchTag::HighFreq) == doctest::Approx(10.0));
  CHECK(n.count(BranchTag::ShortRange) == 0);
}

TEST_CASE("balancer moves weights toward equal effective norms and stays bounded") {
  GradientBalancer bal(0.1);
  const BranchNorms raw{{BranchTag::HighFreq, 0.01}, {BranchTag::ShortRange, 1.0}, {BranchTag::LongRange, 1.0}};
  double prev_ratio = 100.0;
  for (int s = 0; s < 200; ++s) {
    BranchNorms eff = bal.effective(raw);
    bal.update(eff);
    double lo = 1e30, hi = 0;
    for (auto [t, g] : bal.effective(raw)) {
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
    CHECK(hi / lo <= prev_ratio + 1e-12);
    prev_ratio = hi / lo;
    for (auto [t, w] : bal.weights()) CHECK((w >= 0.1 && w <= 10.0));
  }
  CHECK(prev_ratio < 100.0);
}

TEST_CASE("balancer ignores dead branches") {
  GradientBalancer bal;
  bal.update({{BranchTag::HighFreq, 0.0}, {BranchTag::ShortRange, 1.0}});
  CHECK(bal.weights().empty());
  CHECK(bal.weight(BranchTag::HighFreq) == 1.0);
}

TEST_CASE("loss CSV has the fixed column order") {
  CHECK(loss_csv_header() == "step,ce,cfal,cfbl,total,G_highfreq,G_shortrange,G_longrange,G_mean,lr");
  LossReport r = total_loss(0.5, 0.25, 0.0, LossWeights{}, {{BranchTag::HighFreq, 1.5}});
  r.step = 3;
  std::istringstream row(loss_csv_row(r));
  std::string cell;
  std::vector<std::string> cells;
  while (std::getline(row, cell, ',')) cells.push_back(cell);
  REQUIRE(cells.size() >= 9);
  CHECK(cells[0] == "3");
  CHECK(cells[5] == "1.5");
  CHECK(cells[6].empty());
}
