// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Low-frequency sub-branches over the downsampled LF component: a residual
// CNN with a local receptive field (F_s) and a pre-norm transformer over
// patches with a global one (F_l).

#pragma once

#include <string>
#include <vector>

#include "f2net/config.hpp"
#include "f2net/ops.hpp"
#include "f2net/param_store.hpp"

namespace f2net {

/// softmax(q k^T / sqrt(dh)) v for q, k, v of shape [T, dh].
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v);

template <typename T>
struct ResidualConvBlock {
  Tensor<T> conv1_weight, conv1_bias;
  Tensor<T> norm_gamma, norm_beta;
  Tensor<T> conv2_weight, conv2_bias;
};

template <typename T>
class ShortRangeBranch {
 public:
  ShortRangeBranch(const LfBranchConfig& cfg, int in_channels, ParamStore<T>& store,
                   Initializer<T>& init, const std::string& prefix = "shortrange");

  /// Stride-2 stem conv followed by the residual blocks.
  Tensor<T> forward(const Tensor<T>& lf_down) const;
  Tensor<T> downsample(const Tensor<T>& lf_down) const;
  int out_channels() const { return cfg_.short_channels; }
  /// Radius, in input pixels, of the support of one output position.
  int receptive_radius() const { return 1 + 4 * cfg_.short_blocks; }

  Tensor<T> stem_weight, stem_bias;
  std::vector<ResidualConvBlock<T>> blocks;

 private:
  LfBranchConfig cfg_;
};

template <typename T>
struct AttentionLayer {
  Tensor<T> norm1_gamma, norm1_beta;
  Tensor<T> q_weight, q_bias, k_weight, v_weight, v_bias;
  Tensor<T> proj_weight, proj_bias;
  Tensor<T> norm2_gamma, norm2_beta;
  Tensor<T> ffn_weight1, ffn_bias1, ffn_weight2, ffn_bias2;
};

template <typename T>
class LongRangeBranch {
 public:
  /// `reference_grid` is the patch-grid side at the training resolution; the
  /// positional table is resampled bilinearly for other grids.
  LongRangeBranch(const LfBranchConfig& cfg, int in_channels, int reference_grid,
                  ParamStore<T>& store, Initializer<T>& init, const std::string& prefix = "longrange");

  Tensor<T> forward(const Tensor<T>& lf_down) const;
  /// Multi-head self-attention sublayer over tokens [T, dim] (pre-norm input).
  Tensor<T> self_attention(const Tensor<T>& tokens, const AttentionLayer<T>& layer) const;
  int out_channels() const { return cfg_.long_dim; }

  Tensor<T> patch_weight, patch_bias;
  Tensor<T> position;  // [g, g, dim]
  std::vector<AttentionLayer<T>> layers;
  Tensor<T> final_gamma, final_beta;

 private:
  LfBranchConfig cfg_;
};

}  // namespace f2net
