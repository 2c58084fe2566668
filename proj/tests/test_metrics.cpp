// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <doctest.h>

#include <random>

#include "f2net/metrics.hpp"

using namespace f2net;

namespace {

SegmentationMap map_of(int h, int w, std::vector<int> labels) { return {h, w, std::move(labels), {}}; }

ConfusionMatrix from_counts(const std::vector<std::vector<std::int64_t>>& rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (std::size_t g = 0; g < rows.size(); ++g)
    for (std::size_t p = 0; p < rows.size(); ++p) cm.at(static_cast<int>(g), static_cast<int>(p)) = rows[g][p];
  return cm;
}

}  // namespace

TEST_CASE("perfect prediction on four pixels") {
  ConfusionMatrix cm(2);
  cm.accumulate(map_of(2, 2, {0, 1, 1, 0}), map_of(2, 2, {0, 1, 1, 0}));
  CHECK(cm.at(0, 0) + cm.at(1, 1) == 4);
  CHECK(miou(cm) == 1.0);
  CHECK(f1(cm) == 1.0);
  CHECK(accuracy(cm) == 1.0);
}

TEST_CASE("all-ignore ground truth only counts ignored pixels") {
  ConfusionMatrix cm(2);
  cm.accumulate(map_of(1, 3, {0, 1, 0}), map_of(1, 3, {255, 255, 255}), 255);
  CHECK(cm.total() == 0);
  CHECK(cm.ignored_pixels() == 3);
  CHECK_THROWS_AS(miou(cm), MetricError);
  CHECK_THROWS_AS(accuracy(cm), MetricError);
}

TEST_CASE("hand-tallied 3x3 case") {
  // gt:   0 0 1 / 1 2 2 / 2 0 1
  // pred: 0 1 1 / 2 2 2 / 0 0 1
  ConfusionMatrix cm(3);
  cm.accumulate(map_of(3, 3, {0, 1, 1, 2, 2, 2, 0, 0, 1}), map_of(3, 3, {0, 0, 1, 1, 2, 2, 2, 0, 1}));
  const std::int64_t expect[3][3] = {{2, 1, 0}, {0, 2, 1}, {1, 0, 2}};
  for (int g = 0; g < 3; ++g)
    for (int p = 0; p < 3; ++p) CHECK(cm.at(g, p) == expect[g][p]);
  // Each class: TP 2, FP 1, FN 1.
  CHECK(miou(cm) == doctest::Approx(0.5));
  CHECK(f1(cm) == doctest::Approx(2.0 / 3.0));
  CHECK(accuracy(cm) == doctest::Approx(6.0 / 9.0));
}

TEST_CASE("binary [[2,1],[1,2]]") {
  ConfusionMatrix cm = from_counts({{2, 1}, {1, 2}});
  const auto iou = per_class_iou(cm);
  CHECK(iou[0] == doctest::Approx(0.5));
  CHECK(iou[1] == doctest::Approx(0.5));
  CHECK(miou(cm) == doctest::Approx(0.5));
  CHECK(accuracy(cm) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(f1(cm) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("binary F1 is the foreground class") {
  ConfusionMatrix cm = from_counts({{8, 0}, {2, 2}});
  CHECK(f1(cm) == doctest::Approx(2.0 * 2 / (2.0 * 2 + 0 + 2)));
}

TEST_CASE("vacuous classes leave the mean") {
  ConfusionMatrix cm = from_counts({{3, 1, 0}, {1, 3, 0}, {0, 0, 0}});
  CHECK(present_classes(cm) == std::vector<int>{0, 1});
  CHECK(miou(cm) == doctest::Approx(0.6));
}

TEST_CASE("out-of-range labels and shape mismatch are rejected") {
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(cm.accumulate(map_of(1, 2, {0, 2}), map_of(1, 2, {0, 1})), std::out_of_range);
  CHECK_THROWS_AS(cm.accumulate(map_of(1, 2, {0, 1}), map_of(2, 1, {0, 1})), std::invalid_argument);
}

TEST_CASE("accumulation order and merge agree") {
  std::mt19937_64 rng(1);
  auto rand_map = [&] {
    std::vector<int> l(64);
    for (auto& v : l) v = static_cast<int>(rng() % 4);
    return map_of(8, 8, l);
  };
  const auto pa = rand_map(), ga = rand_map(), pb = rand_map(), gb = rand_map();
  ConfusionMatrix ab(4), ba(4), a(4), b(4);
  ab.accumulate(pa, ga);
  ab.accumulate(pb, gb);
  ba.accumulate(pb, gb);
  ba.accumulate(pa, ga);
  a.accumulate(pa, ga);
  b.accumulate(pb, gb);
  a.merge(b);
  CHECK(ab == ba);
  CHECK(ab == a);
}

TEST_CASE("metrics are invariant under a shared class permutation") {
  std::mt19937_64 rng(2);
  std::vector<int> p(100), g(100);
  for (int i = 0; i < 100; ++i) {
    g[i] = static_cast<int>(rng() % 3);
    p[i] = rng() % 4 == 0 ? static_cast<int>(rng() % 3) : g[i];
  }
  const int perm[3] = {2, 0, 1};
  std::vector<int> pp(100), gp(100);
  for (int i = 0; i < 100; ++i) {
    pp[i] = perm[p[i]];
    gp[i] = perm[g[i]];
  }
  ConfusionMatrix x(3), y(3);
  x.accumulate(map_of(10, 10, p), map_of(10, 10, g));
  y.accumulate(map_of(10, 10, pp), map_of(10, 10, gp));
  CHECK(miou(x) == doctest::Approx(miou(y)));
  CHECK(f1(x) == doctest::Approx(f1(y)));
  CHECK(accuracy(x) == accuracy(y));
}

TEST_CASE("mIoU grows with added diagonal mass") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<std::int64_t>> rows(4, std::vector<std::int64_t>(4));
    for (int g = 0; g < 4; ++g)
      for (int p = 0; p < 4; ++p) rows[g][p] = g == p ? 20 + static_cast<int>(rng() % 20) : 1 + static_cast<int>(rng() % 5);
    ConfusionMatrix cm = from_counts(rows);
    double prev = miou(cm);
    for (int k = 0; k < 5; ++k) {
      const int c = static_cast<int>(rng() % 4);
      cm.at(c, c) += 1 + static_cast<int>(rng() % 10);
      const double now = miou(cm);
      CHECK(now > prev);
      prev = now;
    }
  }
}

TEST_CASE("all metrics lie in [0, 1] and the report is complete") {
  ConfusionMatrix cm = from_counts({{5, 2, 0}, {1, 0, 3}, {0, 4, 1}});
  for (double v : {miou(cm), f1(cm), accuracy(cm)}) CHECK((v >= 0.0 && v <= 1.0));
  nlohmann::json j = metrics_report(cm, {"a", "b", "c"});
  CHECK(j.at("miou").get<double>() == doctest::Approx(miou(cm)));
  CHECK(j.at("evaluated_pixels").get<std::int64_t>() == 16);
  CHECK(j.at("classes").size() == 3);
  CHECK(j.at("confusion")[2][1].get<int>() == 4);
}
