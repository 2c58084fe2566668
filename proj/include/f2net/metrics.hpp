// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "f2net/segmentation.hpp"

namespace f2net {

class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return classes_; }
  std::int64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * classes_ + pred]; }
  std::int64_t& at(int gt, int pred) { return counts_[static_cast<std::size_t>(gt) * classes_ + pred]; }
  std::int64_t ignored_pixels() const { return ignored_; }
  std::int64_t total() const;
  std::int64_t true_positives(int c) const { return at(c, c); }
  std::int64_t false_positives(int c) const;
  std::int64_t false_negatives(int c) const;

  /// Adds one image. Pixels whose ground truth equals `ignore` are only
  /// counted in ignored_pixels(). Throws std::out_of_range on bad labels.
  void accumulate(const SegmentationMap& pred, const SegmentationMap& gt, std::optional<int> ignore = std::nullopt);
  /// Elementwise sum; associative and commutative.
  void merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_;
  std::vector<std::int64_t> counts_;
  std::int64_t ignored_ = 0;
};

/// Classes with TP + FP + FN > 0.
std::vector<int> present_classes(const ConfusionMatrix& cm);
/// NaN for vacuous classes.
std::vector<double> per_class_iou(const ConfusionMatrix& cm);
std::vector<double> per_class_f1(const ConfusionMatrix& cm);

/// All three throw MetricError when nothing was evaluated.
double miou(const ConfusionMatrix& cm);
/// Macro mean over present classes; for two classes, the F1 of class 1.
double f1(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

nlohmann::json metrics_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names = {});

}  // namespace f2net
