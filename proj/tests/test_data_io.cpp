// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <doctest.h>

#include <fstream>
#include <iterator>

#include "f2net/data_io.hpp"
#include "test_util.hpp"

using namespace f2net;
using namespace f2net::testing;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<int> coverage(const TilePlan& plan) {
  std::vector<int> n(static_cast<std::size_t>(plan.height) * plan.width, 0);
  for (const TileWindow& w : plan.windows)
    for (int y = w.row; y < w.row + w.height; ++y)
      for (int x = w.col; x < w.col + w.width; ++x) ++n[static_cast<std::size_t>(y) * plan.width + x];
  return n;
}

}  // namespace

TEST_CASE("synthetic generation is byte-identical per seed") {
  TempDir a("gen_a"), b("gen_b");
  gen_synthetic(a.path, 3, 4, 32, 3);
  gen_synthetic(b.path, 3, 4, 32, 3);
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path);
    INFO(rel.string());
    CHECK(slurp(e.path()) == slurp(b.path / rel));
  }
  TempDir c("gen_c");
  gen_synthetic(c.path, 4, 4, 32, 3);
  CHECK(slurp(a.path / "train/images/0000.png") != slurp(c.path / "train/images/0000.png"));
}

TEST_CASE("synthetic splits and manifest round-trip") {
  TempDir d("gen_manifest");
  DatasetSpec spec = gen_synthetic(d.path, 1, 16, 32, 4);
  CHECK(spec.train.size() + spec.val.size() + spec.test.size() == 16);
  CHECK(!spec.val.empty());
  DatasetSpec back = read_manifest(d.path);
  CHECK(back.train == spec.train);
  CHECK(back.palette == spec.palette);
  CHECK(back.num_classes == 4);
}

TEST_CASE("two classes give binary masks") {
  SyntheticSample s = generate_synthetic_sample(2, 0, 48, 2);
  for (int l : s.mask.labels) CHECK((l == 0 || l == 1));
  CHECK(s.audit.class_pixels[0] > 0);
  CHECK(s.audit.class_pixels[1] > 0);
}

TEST_CASE("texture shapes keep the background mean within 2 percent") {
  for (int i = 0; i < 12; ++i) CHECK(generate_synthetic_sample(11, i, 64, 4).audit.max_mean_deviation < 0.02);

  // Independent check from the pixels alone. Every texture is a +-A pattern
  // that balances over block-aligned 4x4 windows, so inside a window wholly
  // within one shape the mean sits at the midpoint of the two levels.
  for (int i = 0; i < 4; ++i) {
    SyntheticSample s = generate_synthetic_sample(13, i, 64, 7);
    int windows = 0;
    for (int y0 = 1; y0 + 4 <= 64; y0 += 4)
      for (int x0 = 1; x0 + 4 <= 64; x0 += 4) {
        const int c = s.mask.at(y0, x0);
        if (c < 2 || c == 6) continue;  // smooth classes and the thin structure
        bool uniform = true;
        for (int y = y0; y < y0 + 4; ++y)
          for (int x = x0; x < x0 + 4; ++x) uniform &= s.mask.at(y, x) == c;
        if (!uniform) continue;
        for (int ch = 0; ch < 3; ++ch) {
          double sum = 0, lo = 1e9, hi = -1e9;
          for (int y = y0; y < y0 + 4; ++y)
            for (int x = x0; x < x0 + 4; ++x) {
              const double v = s.image.pixels[(static_cast<std::size_t>(y) * 64 + x) * 3 + ch];
              sum += v;
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
          const double mid = 0.5 * (lo + hi);
          CHECK(std::abs(sum / 16 - mid) / mid < 0.02);
        }
        ++windows;
      }
    CHECK(windows > 0);
  }
}

TEST_CASE("class frequencies are balanced within 3:1 over 100 images") {
  std::vector<long> px(3, 0);
  for (int i = 0; i < 100; ++i) {
    SyntheticSample s = generate_synthetic_sample(9, i, 32, 3);
    for (int c = 0; c < 3; ++c) px[c] += s.audit.class_pixels[c];
  }
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  CHECK(static_cast<double>(*hi) / static_cast<double>(*lo) <= 3.0);
}

TEST_CASE("generator rejects out-of-range arguments") {
  CHECK_THROWS_AS(generate_synthetic_sample(0, 0, 64, 8), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic_sample(0, 0, 16, 3), std::invalid_argument);
}

TEST_CASE("mask codec round-trips every class id and ignore") {
  const DatasetSpec spec = default_dataset_spec(7);
  std::mt19937_64 rng(1);
  SegmentationMap m{9, 11, std::vector<int>(99), {}};
  for (auto& l : m.labels) {
    const int r = static_cast<int>(rng() % 8);
    l = r == 7 ? spec.ignore_index : r;
  }
  int warnings = 0;
  SegmentationMap back = decode_mask(encode_mask(m, spec), spec, &warnings);
  CHECK(back.labels == m.labels);
  CHECK(warnings == 0);
}

TEST_CASE("off-palette pixels become ignore with one warning") {
  TempDir d("codec");
  const DatasetSpec spec = default_dataset_spec(2);
  Image8 img{2, 2, 3, std::vector<std::uint8_t>(12, 255)};
  SegmentationMap m{2, 2, {0, 1, 1, 0}, {}};
  Image8 mask = encode_mask(m, spec);
  mask.pixels[3] = 17;
  mask.pixels[4] = 42;
  mask.pixels[5] = 99;
  write_png(d.path / "i.png", img);
  write_png(d.path / "m.png", mask);
  LoadedPair p = load_pair(d.path / "i.png", d.path / "m.png", spec);
  CHECK(p.warnings == 1);
  CHECK(p.mask.labels == std::vector<int>{0, spec.ignore_index, 1, 0});
  for (float v : p.image.data()) CHECK(v == 1.0f);
}

TEST_CASE("indexed and RGB mask files decode the same") {
  TempDir d("indexed");
  const DatasetSpec spec = default_dataset_spec(3);
  SegmentationMap m{3, 4, {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, spec.ignore_index}, {}};
  write_mask(d.path / "m.png", m, spec);
  CHECK(decode_mask(read_png(d.path / "m.png"), spec).labels == m.labels);
}

TEST_CASE("image and mask of different sizes is a DimensionError") {
  TempDir d("mismatch");
  const DatasetSpec spec = default_dataset_spec(2);
  write_png(d.path / "i.png", Image8{4, 4, 3, std::vector<std::uint8_t>(48, 0)});
  write_mask(d.path / "m.png", SegmentationMap{4, 5, std::vector<int>(20, 0), {}}, spec);
  CHECK_THROWS_AS(load_pair(d.path / "i.png", d.path / "m.png", spec), DimensionError);
}

TEST_CASE("reading a missing or bogus PNG is an ImageIoError") {
  TempDir d("bogus");
  CHECK_THROWS_AS(read_png(d.path / "none.png"), ImageIoError);
  std::ofstream(d.path / "x.png") << "not a png";
  CHECK_THROWS_AS(read_png(d.path / "x.png"), ImageIoError);
}

TEST_CASE("tile_plan: one window, 2x2 with clamping, exact partition") {
  CHECK(tile_plan(64, 64, 64, 0).windows.size() == 1);
  CHECK(tile_plan(40, 50, 64, 8).windows.size() == 1);

  const TilePlan p = tile_plan(100, 100, 64, 16);
  REQUIRE(p.windows.size() == 4);
  for (int n : coverage(p)) CHECK(n >= 1);
  for (const TileWindow& w : p.windows) {
    CHECK(w.row + w.height <= 100);
    CHECK(w.col + w.width <= 100);
  }
  // Adjacent windows overlap by exactly the overlap.
  CHECK(p.windows[0].col + p.windows[0].width - p.windows[1].col == 16);

  const TilePlan q = tile_plan(96, 70, 32, 0);
  for (int n : coverage(q)) CHECK(n == 1);

  CHECK_THROWS_AS(tile_plan(64, 64, 32, 16), std::invalid_argument);
}

TEST_CASE("seam bands lie around interior window edges only") {
  const TilePlan p = tile_plan(96, 96, 64, 16);
  const auto m = seam_mask(p, 8);
  CHECK(m[0] == 0);
  CHECK(m[95 * 96 + 95] == 0);
  // Second window starts at 48; its left edge is a seam.
  CHECK(m[10 * 96 + 48] == 1);
  CHECK(m[10 * 96 + 20] == 0);
}

TEST_CASE("prefetcher preserves order and surfaces errors") {
  TempDir d("prefetch");
  DatasetSpec spec = gen_synthetic(d.path, 2, 8, 32, 3);
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> items;
  for (const auto& s : spec.train) items.emplace_back(spec.image_path("train", s), spec.mask_path("train", s));
  {
    PairPrefetcher pf(spec, items, 2);
    for (const auto& [img, mask] : items) {
      auto got = pf.next();
      REQUIRE(got.has_value());
      CHECK(got->mask.labels == load_pair(img, mask, spec).mask.labels);
    }
    CHECK(!pf.next().has_value());
  }
  items.emplace_back(d.path / "missing.png", d.path / "missing.png");
  PairPrefetcher pf(spec, {items.back()}, 2);
  CHECK_THROWS_AS(pf.next(), ImageIoError);
}
