// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Adaptive frequency decomposition. A pointwise stem lifts the image to D
// channels; the channels are split into N groups and each group predicts a
// per-pixel k x k softmax (low-pass) kernel from its own features. The
// high-pass kernel is the identity tap minus the low-pass kernel, so the two
// filtered maps sum back to the stem features.

#pragma once

#include <vector>

#include "f2net/config.hpp"
#include "f2net/ops.hpp"
#include "f2net/param_store.hpp"

namespace f2net {

template <typename T>
struct FrequencyPair {
  Tensor<T> lf;                           // [H, W, D]
  Tensor<T> hf;                           // [H, W, D]
  std::vector<Tensor<T>> lowpass_kernels;  // one [H, W, k*k] field per group
  std::vector<Tensor<T>> highpass_kernels;
};

/// delta_center - lowpass (Identity) or 1 - lowpass (AllOnes), per pixel.
template <typename T>
Tensor<T> derive_highpass_kernels(const Tensor<T>& lowpass, HighpassMode mode = HighpassMode::Identity);

/// Bilinear reduction by an integer factor; factor must divide both sides.
template <typename T>
Tensor<T> downsample_lf(const Tensor<T>& lf, int factor);

template <typename T>
class FrequencyDecomposer {
 public:
  FrequencyDecomposer(const AfdConfig& cfg, int in_channels, ParamStore<T>& store,
                      Initializer<T>& init, const std::string& prefix = "stem");

  /// 1x1 convolution image[H, W, C] -> X[H, W, D].
  Tensor<T> stem(const Tensor<T>& image) const;
  /// softmax(conv_kxk(group_features)) along the k*k axis.
  Tensor<T> build_lowpass_kernels(const Tensor<T>& group_features, int group) const;
  FrequencyPair<T> decompose(const Tensor<T>& features) const;

  const AfdConfig& config() const { return cfg_; }
  int group_width() const { return cfg_.embed_dim / cfg_.groups; }

  Tensor<T> stem_weight, stem_bias;
  std::vector<Tensor<T>> generator_weight, generator_bias;

 private:
  AfdConfig cfg_;
  int in_channels_;
};

}  // namespace f2net
