// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Hybrid-frequency fusion: squeeze-excitation style channel attention per
// input, a cross-branch attention matrix M = sigmoid(A_a A_b^T), MLP
// refinement of each attention from flatten(M), and a sum of 1x1-aligned,
// attention-scaled inputs.

#pragma once

#include <string>
#include <utility>

#include "f2net/ops.hpp"
#include "f2net/param_store.hpp"

namespace f2net {

/// Two-layer perceptron: fc2(gelu(fc1(x))).
template <typename T>
struct Mlp {
  Tensor<T> weight1, bias1, weight2, bias2;

  Tensor<T> operator()(const Tensor<T>& x) const {
    return linear(gelu(linear(x, weight1, bias1)), weight2, bias2);
  }
};

/// A = sigmoid(MLP(spatial_avg_pool(F))) in (0, 1)^C.
template <typename T>
Tensor<T> channel_attention(const Tensor<T>& features, const Mlp<T>& mlp);

/// M = sigmoid(A_a A_b^T), shape [Ca, Cb].
template <typename T>
Tensor<T> cross_branch_matrix(const Tensor<T>& attn_a, const Tensor<T>& attn_b);

/// (sigmoid(MLP_a(flatten M) + A_a), sigmoid(MLP_b(flatten M) + A_b)).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> refine_attentions(const Tensor<T>& matrix, const Tensor<T>& attn_a,
                                                  const Tensor<T>& attn_b, const Mlp<T>& refine_a,
                                                  const Mlp<T>& refine_b);

template <typename T>
struct FusionTrace {
  Tensor<T> attn_a, attn_b, matrix, refined_a, refined_b, output;
};

template <typename T>
class HybridFrequencyFusion {
 public:
  /// fused_channels <= 0 selects max(ca, cb).
  HybridFrequencyFusion(int ca, int cb, int squeeze_ratio, ParamStore<T>& store,
                        Initializer<T>& init, const std::string& prefix, int fused_channels = 0);

  Tensor<T> fuse(const Tensor<T>& fa, const Tensor<T>& fb) const { return trace(fa, fb).output; }
  FusionTrace<T> trace(const Tensor<T>& fa, const Tensor<T>& fb) const;

  int out_channels() const { return cf_; }

  Mlp<T> attention_a, attention_b;
  Mlp<T> refine_a, refine_b;
  Tensor<T> align_a_weight, align_a_bias, align_b_weight, align_b_bias;

 private:
  int ca_, cb_, cf_;
};

}  // namespace f2net
