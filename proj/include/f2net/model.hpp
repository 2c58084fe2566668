// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// End-to-end assembly: stem -> frequency decomposition -> {high-frequency
// encoder at full resolution, short/long-range encoders on the downsampled
// low-frequency map} -> two fusion stages -> 1x1 head -> bilinear upsample.
// Also owns the SGD training step and tiled inference.

#pragma once

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "f2net/afd.hpp"
#include "f2net/config.hpp"
#include "f2net/hf_branch.hpp"
#include "f2net/hff_fusion.hpp"
#include "f2net/lf_branch.hpp"
#include "f2net/objectives.hpp"
#include "f2net/segmentation.hpp"

namespace f2net {

template <typename T>
struct BranchOutputs {
  Tensor<T> f_m;   // high-frequency branch
  Tensor<T> f_s;   // short-range sub-branch
  Tensor<T> f_l;   // long-range sub-branch
  Tensor<T> f_sl;  // fused low-frequency features
};

template <typename T>
struct ForwardOutputs {
  Tensor<T> logits;  // [H, W, L] at the input resolution
  Tensor<T> stem;    // X, on the padded grid
  FrequencyPair<T> frequency;
  Tensor<T> lf_down;
  BranchOutputs<T> branches;
  Tensor<T> fused;
};

template <typename T>
class F2Net {
 public:
  explicit F2Net(const F2NetConfig& cfg);

  F2Net(const F2Net&) = delete;
  F2Net& operator=(const F2Net&) = delete;

  ForwardOutputs<T> forward(const Tensor<T>& image) const;
  /// Symmetric KL between the channel distributions of F_sl and F_m on the
  /// finer of their grids; a constant zero when either branch is disabled.
  Tensor<T> alignment_loss(const ForwardOutputs<T>& out) const;

  const F2NetConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }

  FrequencyDecomposer<T>& decomposer() { return *afd_; }
  const FrequencyDecomposer<T>& decomposer() const { return *afd_; }
  HighFrequencyBranch<T>* highfreq() { return hf_ ? &*hf_ : nullptr; }
  ShortRangeBranch<T>* shortrange() { return short_ ? &*short_ : nullptr; }
  LongRangeBranch<T>* longrange() { return long_ ? &*long_ : nullptr; }
  HybridFrequencyFusion<T>* lf_fusion() { return fuse_lf_ ? &*fuse_lf_ : nullptr; }
  HybridFrequencyFusion<T>* final_fusion() { return fuse_final_ ? &*fuse_final_ : nullptr; }

  Tensor<T> head_weight, head_bias;
  Tensor<T> align_projection_sl, align_projection_m;  // frozen, seeded

 private:
  F2NetConfig cfg_;
  ParamStore<T> store_;
  std::optional<FrequencyDecomposer<T>> afd_;
  std::optional<HighFrequencyBranch<T>> hf_;
  std::optional<ShortRangeBranch<T>> short_;
  std::optional<LongRangeBranch<T>> long_;
  std::optional<HybridFrequencyFusion<T>> fuse_lf_;
  std::optional<HybridFrequencyFusion<T>> fuse_final_;
};

/// lr0 * (1 - iter/total)^power; iterations past `total` give 0.
double poly_lr(long iter, long total, double lr0, double power);

template <typename T>
struct TrainSample {
  Tensor<T> image;          // [H, W, C] in [0, 1]
  std::vector<int> labels;  // H * W class ids or ignore_index
};

struct TrainingState {
  long iteration = 0;
  std::string rng_state;
  std::map<BranchTag, double> balance_weights;
};

template <typename T>
class Trainer {
 public:
  explicit Trainer(F2Net<T>& model);

  /// One SGD-momentum update on the batch (gradients averaged over samples).
  /// Throws std::runtime_error with a per-branch norm dump on a non-finite loss.
  LossReport step(std::span<const TrainSample<T>> batch);

  /// Draws a batch of indices in [0, n) from the trainer's seeded stream.
  std::vector<std::size_t> sample_indices(std::size_t n);

  long iteration() const { return iteration_; }
  TrainingState state() const;
  void restore(const TrainingState& s);
  GradientBalancer& balancer() { return balancer_; }

 private:
  F2Net<T>& model_;
  long iteration_ = 0;
  std::mt19937_64 rng_;
  GradientBalancer balancer_;
};

/// Whole-image logits with no graph recording.
template <typename T>
Tensor<T> predict_logits(const F2Net<T>& model, const Tensor<T>& image);

/// Logits from overlapping tiles blended with linear ramps across each
/// interior seam. Falls back to a whole-image pass when one tile covers it.
template <typename T>
Tensor<T> predict_logits_tiled(const F2Net<T>& model, const Tensor<T>& image, int tile, int overlap);

/// Tiled (tile > 0) or whole-image prediction: softmax scores and argmax.
template <typename T>
SegmentationMap predict(const F2Net<T>& model, const Tensor<T>& image, int tile = 0, int overlap = 0);

}  // namespace f2net
