// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#pragma once

#include <vector>

#include "f2net/tensor.hpp"

namespace f2net {

/// Per-pixel class labels in row-major order, optionally with the per-pixel
/// class posteriors [H, W, L] that produced them.
struct SegmentationMap {
  int height = 0;
  int width = 0;
  std::vector<int> labels;
  Tensor<float> scores;

  int at(int row, int col) const { return labels[static_cast<std::size_t>(row) * width + col]; }
};

/// Row-wise argmax of [H, W, L] scores.
template <typename T>
SegmentationMap argmax_labels(const Tensor<T>& scores);

}  // namespace f2net
