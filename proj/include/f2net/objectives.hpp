// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Training objectives: segmentation cross-entropy, the symmetric-KL
// cross-frequency alignment loss, and the gradient-norm balance term with
// the first-order branch reweighting that implements it.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include "f2net/config.hpp"
#include "f2net/ops.hpp"
#include "f2net/param_store.hpp"

namespace f2net {

using BranchNorms = std::map<BranchTag, double>;

template <typename T>
Tensor<T> ce_loss(const Tensor<T>& logits, std::span<const int> target,
                  std::optional<int> ignore_index = std::nullopt) {
  return cross_entropy(logits, target, ignore_index);
}

/// 1x1 projection to the common width, bilinear resize to the target grid,
/// then a per-pixel softmax over channels.
template <typename T>
Tensor<T> feature_to_distribution(const Tensor<T>& features, const Tensor<T>& projection,
                                  int target_h, int target_w);

/// Mean per-pixel 0.5 [KL(p||q) + KL(q||p)] between two distribution maps.
template <typename T>
Tensor<T> cfal(const Tensor<T>& dist_a, const Tensor<T>& dist_b) {
  return symmetric_kl(dist_a, dist_b, T(1e-8));
}

/// L2 norms of the current gradients grouped by balanced branch tag,
/// multiplied by `scale`. Tags with no trainable parameters are absent.
template <typename T>
BranchNorms collect_branch_norms(const ParamStore<T>& params, double scale = 1.0);

/// One isolated backward pass of `ce`: returns per-branch gradient norms and
/// leaves the parameters' existing gradients untouched.
template <typename T>
BranchNorms branch_grad_norms(const Tensor<T>& ce, ParamStore<T>& params);

double mean_norm(const BranchNorms& norms);
/// sum_b |G_b - mean(G)|; 0 for an empty map.
double cfbl(const BranchNorms& norms);

struct LossReport {
  long step = 0;
  double ce = 0, cfal = 0, cfbl = 0, total = 0;
  BranchNorms branch_grad_norms;
  double mean_grad_norm = 0;
  double lr = 0;
};

LossReport total_loss(double ce, double cfal, double cfbl, const LossWeights& w,
                      const BranchNorms& norms = {});

std::string loss_csv_header();
std::string loss_csv_row(const LossReport& r);

/// Per-branch multiplicative gradient weights, kept at mean 1. Each update
/// moves w_b by (mean / G_b)^rate, where G_b is the norm of the branch
/// gradient after weighting, and clips w_b to [0.1, 10].
class GradientBalancer {
 public:
  explicit GradientBalancer(double rate = 0.1) : rate_(rate) {}

  double weight(BranchTag tag) const;
  const std::map<BranchTag, double>& weights() const { return weights_; }
  void set_weights(std::map<BranchTag, double> w) { weights_ = std::move(w); }

  /// Maps raw norms to the norms of the weighted gradients.
  BranchNorms effective(const BranchNorms& raw) const;
  void update(const BranchNorms& effective_norms);

 private:
  double rate_;
  std::map<BranchTag, double> weights_;
};

}  // namespace f2net
