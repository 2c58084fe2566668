// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace f2net {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : classes_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 1) throw std::invalid_argument("ConfusionMatrix: need at least one class");
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::false_positives(int c) const {
  std::int64_t s = 0;
  for (int g = 0; g < classes_; ++g) {
    if (g != c) s += at(g, c);
  }
  return s;
}

std::int64_t ConfusionMatrix::false_negatives(int c) const {
  std::int64_t s = 0;
  for (int p = 0; p < classes_; ++p) {
    if (p != c) s += at(c, p);
  }
  return s;
}

void ConfusionMatrix::accumulate(const SegmentationMap& pred, const SegmentationMap& gt, std::optional<int> ignore) {
  if (pred.labels.size() != gt.labels.size() || pred.height != gt.height || pred.width != gt.width) {
    throw std::invalid_argument("accumulate: prediction is " + std::to_string(pred.height) + "x" +
                                std::to_string(pred.width) + ", ground truth is " + std::to_string(gt.height) +
                                "x" + std::to_string(gt.width));
  }
  // Validate first so a bad label leaves the matrix untouched.
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    if (ignore && g == *ignore) continue;
    const int p = pred.labels[i];
    if (g < 0 || g >= classes_ || p < 0 || p >= classes_) {
      throw std::out_of_range("accumulate: label out of range at pixel " + std::to_string(i) + " (gt " +
                              std::to_string(g) + ", pred " + std::to_string(p) + ")");
    }
  }
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    if (ignore && g == *ignore) {
      ++ignored_;
      continue;
    }
    ++at(g, pred.labels[i]);
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("merge: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
}

std::vector<int> present_classes(const ConfusionMatrix& cm) {
  std::vector<int> out;
  for (int c = 0; c < cm.num_classes(); ++c) {
    if (cm.true_positives(c) + cm.false_positives(c) + cm.false_negatives(c) > 0) out.push_back(c);
  }
  return out;
}

std::vector<double> per_class_iou(const ConfusionMatrix& cm) {
  std::vector<double> out(cm.num_classes(), std::numeric_limits<double>::quiet_NaN());
  for (int c : present_classes(cm)) {
    const double tp = static_cast<double>(cm.true_positives(c));
    out[c] = tp / (tp + cm.false_positives(c) + cm.false_negatives(c));
  }
  return out;
}

std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
  std::vector<double> out(cm.num_classes(), std::numeric_limits<double>::quiet_NaN());
  for (int c : present_classes(cm)) {
    const double tp = static_cast<double>(cm.true_positives(c));
    out[c] = 2 * tp / (2 * tp + cm.false_positives(c) + cm.false_negatives(c));
  }
  return out;
}

namespace {

void require_pixels(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw MetricError("metrics are undefined: no pixels were evaluated");
}

double mean_over_present(const ConfusionMatrix& cm, const std::vector<double>& per_class) {
  double s = 0;
  int n = 0;
  for (int c : present_classes(cm)) {
    s += per_class[c];
    ++n;
  }
  return s / n;
}

}  // namespace

double miou(const ConfusionMatrix& cm) {
  require_pixels(cm);
  return mean_over_present(cm, per_class_iou(cm));
}

double f1(const ConfusionMatrix& cm) {
  require_pixels(cm);
  const auto per = per_class_f1(cm);
  if (cm.num_classes() == 2) return std::isnan(per[1]) ? 0.0 : per[1];
  return mean_over_present(cm, per);
}

double accuracy(const ConfusionMatrix& cm) {
  require_pixels(cm);
  std::int64_t trace = 0;
  for (int c = 0; c < cm.num_classes(); ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(cm.total());
}

nlohmann::json metrics_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
  nlohmann::json j;
  j["miou"] = miou(cm);
  j["f1"] = f1(cm);
  j["accuracy"] = accuracy(cm);
  j["evaluated_pixels"] = cm.total();
  j["ignored_pixels"] = cm.ignored_pixels();
  const auto iou = per_class_iou(cm);
  const auto f = per_class_f1(cm);
  nlohmann::json classes = nlohmann::json::array();
  nlohmann::json matrix = nlohmann::json::array();
  for (int c = 0; c < cm.num_classes(); ++c) {
    nlohmann::json e;
    e["id"] = c;
    if (c < static_cast<int>(class_names.size())) e["name"] = class_names[c];
    e["iou"] = std::isnan(iou[c]) ? nlohmann::json(nullptr) : nlohmann::json(iou[c]);
    e["f1"] = std::isnan(f[c]) ? nlohmann::json(nullptr) : nlohmann::json(f[c]);
    std::int64_t gt = 0;
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < cm.num_classes(); ++p) {
      gt += cm.at(c, p);
      row.push_back(cm.at(c, p));
    }
    e["gt_pixels"] = gt;
    classes.push_back(e);
    matrix.push_back(row);
  }
  j["classes"] = classes;
  j["confusion"] = matrix;
  return j;
}

}  // namespace f2net
