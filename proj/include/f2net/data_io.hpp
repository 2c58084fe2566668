// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Dataset layout, PNG codecs, the synthetic frequency-probe generator, and
// tiling plans for piecewise inference.

#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "f2net/segmentation.hpp"
#include "f2net/tensor.hpp"

namespace f2net {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit interleaved raster.
struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes any 8-bit or 16-bit PNG to RGB (gray is replicated, alpha dropped,
/// palettes expanded).
Image8 read_png(const std::filesystem::path& path);
/// Writes 1-channel gray or 3-channel RGB.
void write_png(const std::filesystem::path& path, const Image8& image);
/// Writes a paletted PNG; each pixel value indexes `palette`.
void write_indexed_png(const std::filesystem::path& path, int height, int width,
                       const std::vector<std::uint8_t>& indices, const std::vector<Rgb>& palette);

struct DatasetSpec {
  std::filesystem::path root;
  std::vector<std::string> train, val, test;  // sample stems, e.g. "0007"
  int num_classes = 0;
  std::vector<Rgb> palette;  // class id -> colour
  int ignore_index = 255;
  Rgb ignore_color{0, 0, 0};
  std::vector<std::string> class_names;

  std::filesystem::path image_path(const std::string& split, const std::string& stem) const;
  std::filesystem::path mask_path(const std::string& split, const std::string& stem) const;
  const std::vector<std::string>& split(const std::string& name) const;
  /// Throws std::invalid_argument on a non-injective palette or bad sizes.
  void validate() const;
};

/// DeepGlobe-style legend for L in [3, 7]; black/white building masks for L = 2.
DatasetSpec default_dataset_spec(int num_classes);

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j, const std::filesystem::path& root);
void write_manifest(const DatasetSpec& spec);
/// Reads `root/manifest.json`.
DatasetSpec read_manifest(const std::filesystem::path& root);

Image8 encode_mask(const SegmentationMap& mask, const DatasetSpec& spec);
/// Colours not in the palette decode to the ignore id and bump `warnings`.
SegmentationMap decode_mask(const Image8& rgb, const DatasetSpec& spec, int* warnings = nullptr);
void write_mask(const std::filesystem::path& path, const SegmentationMap& mask, const DatasetSpec& spec);

Tensor<float> image_to_tensor(const Image8& image);
/// Clamps to [0, 1] and rounds to 8 bits.
Image8 tensor_to_image(const Tensor<float>& t);

struct LoadedPair {
  Tensor<float> image;
  SegmentationMap mask;
  int warnings = 0;
};

/// Throws DimensionError when image and mask sizes differ.
LoadedPair load_pair(const std::filesystem::path& image_path, const std::filesystem::path& mask_path,
                     const DatasetSpec& spec);

struct SyntheticAudit {
  double max_mean_deviation = 0;  // relative, texture pixels vs the field beneath them
  std::vector<long> class_pixels;
};

struct SyntheticSample {
  Image8 image;
  SegmentationMap mask;
  SyntheticAudit audit;
};

/// One image of the frequency-probe set. Deterministic in (seed, index).
SyntheticSample generate_synthetic_sample(std::uint64_t seed, int index, int size, int classes);

/// Writes `count` pairs plus the manifest under `root`; splits are 75 / 12.5 /
/// 12.5 percent. Throws std::invalid_argument outside classes in [2, 7] or
/// size < 32.
DatasetSpec gen_synthetic(const std::filesystem::path& root, std::uint64_t seed, int count, int size,
                          int classes, SyntheticAudit* audit = nullptr);

struct TileWindow {
  int row = 0, col = 0, height = 0, width = 0;
};

struct TilePlan {
  int height = 0, width = 0;
  int overlap = 0;
  std::vector<TileWindow> windows;
};

/// Windows of side `tile` at stride tile - overlap; the last row and column
/// are clamped to the image edge, so they may be narrower. tile > min(H, W)
/// yields the whole image.
TilePlan tile_plan(int height, int width, int tile, int overlap);

/// 1 for pixels within `band` pixels of an interior window edge.
std::vector<std::uint8_t> seam_mask(const TilePlan& plan, int band);

/// Decodes (image, mask) pairs on a worker thread into a bounded queue and
/// hands them out in input order.
class PairPrefetcher {
 public:
  PairPrefetcher(DatasetSpec spec, std::vector<std::pair<std::filesystem::path, std::filesystem::path>> items,
                 std::size_t capacity = 4);
  ~PairPrefetcher();
  PairPrefetcher(const PairPrefetcher&) = delete;
  PairPrefetcher& operator=(const PairPrefetcher&) = delete;

  /// Next pair, or nullopt after the last one. Rethrows decoding errors.
  std::optional<LoadedPair> next();

 private:
  void run(std::stop_token stop);

  DatasetSpec spec_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> items_;
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::deque<LoadedPair> queue_;
  std::exception_ptr error_;
  bool done_ = false;
  std::jthread worker_;
};

}  // namespace f2net
