// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Full-resolution high-frequency encoder built from visual state-space (VSS)
// blocks. The 2D scan is a simplified selective scan: four directional,
// content-gated convex recurrences whose outputs are summed and projected.

#pragma once

#include <string>
#include <vector>

#include "f2net/config.hpp"
#include "f2net/ops.hpp"
#include "f2net/param_store.hpp"

namespace f2net {

inline const std::vector<ScanDirection> kAllScanDirections{
    ScanDirection::RowForward, ScanDirection::RowBackward, ScanDirection::ColForward,
    ScanDirection::ColBackward};

template <typename T>
struct ScanProjection {
  ScanDirection direction;
  Tensor<T> gate_weight, gate_bias;    // a_t = sigmoid(x W_g + b_g)
  Tensor<T> value_weight, value_bias;  // v_t = x W_v + b_v
};

template <typename T>
struct VssBlockParams {
  Tensor<T> norm1_gamma, norm1_beta;
  std::vector<ScanProjection<T>> scans;
  Tensor<T> out_weight, out_bias;
  Tensor<T> norm2_gamma, norm2_beta;
  Tensor<T> ffn_weight1, ffn_bias1, ffn_weight2, ffn_bias2;
};

template <typename T>
VssBlockParams<T> make_vss_block(ParamStore<T>& store, const std::string& prefix, int channels,
                                 const HfBranchConfig& cfg, Initializer<T>& init,
                                 const std::vector<ScanDirection>& directions = kAllScanDirections);

/// Sum of directional scans followed by the output projection.
template <typename T>
Tensor<T> ss2d_scan(const Tensor<T>& x, const VssBlockParams<T>& p);

/// z1 = z + SS2D(LN(z)); out = z1 + FFN(LN(z1)).
template <typename T>
Tensor<T> vss_block(const Tensor<T>& z, const VssBlockParams<T>& p);

template <typename T>
class HighFrequencyBranch {
 public:
  HighFrequencyBranch(const HfBranchConfig& cfg, int in_channels, ParamStore<T>& store,
                      Initializer<T>& init, const std::string& prefix = "highfreq");

  /// Stride-2 3x3 convolution to base_channels.
  Tensor<T> embed(const Tensor<T>& hf) const;
  /// Returns F_m.
  Tensor<T> forward(const Tensor<T>& hf) const;

  int out_channels() const;
  /// Total stride from the branch input to F_m.
  int out_stride() const { return 1 << cfg_.num_stages; }

  Tensor<T> embed_weight, embed_bias;
  std::vector<std::vector<VssBlockParams<T>>> stages;
  std::vector<Tensor<T>> down_weight, down_bias;  // between consecutive stages

 private:
  HfBranchConfig cfg_;
};

}  // namespace f2net
