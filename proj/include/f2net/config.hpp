// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace f2net {

enum class HighpassMode {
  Identity,  // delta minus low-pass: lf + hf reconstructs the input
  AllOnes,   // ones(k x k) minus low-pass; kept for comparison only
};

struct AfdConfig {
  int embed_dim = 32;
  int groups = 4;
  int kernel_size = 3;
  int lf_downsample_factor = 4;
  HighpassMode highpass_mode = HighpassMode::Identity;
};

struct HfBranchConfig {
  std::vector<int> stage_depths{1, 1, 2, 1};
  int base_channels = 16;
  int num_stages = 4;
  double ssm_state_mixing = 0.0;  // initial bias of every scan gate projection
  int ffn_expansion = 4;
};

struct LfBranchConfig {
  int short_blocks = 2;
  int short_channels = 32;
  int long_layers = 2;
  int long_heads = 2;
  int long_dim = 64;
  int patch_size = 4;
};

struct FusionConfig {
  int squeeze_ratio = 4;
  int cfal_channels = 0;  // 0: use num_classes
};

struct LossWeights {
  double lambda1 = 0.1;  // alignment (CFAL)
  double lambda2 = 0.1;  // balance (CFBL)
  double lambda3 = 1.0;  // cross-entropy
};

struct OptimizerConfig {
  double lr0 = 1e-3;
  double momentum = 0.9;
  double poly_power = 0.9;
  int total_iters = 1000;
  int batch_size = 2;
  double balance_rate = 0.1;  // exponent of the per-step branch weight update
};

struct BranchToggles {
  bool highfreq = true;
  bool shortrange = true;
  bool longrange = true;
};

struct F2NetConfig {
  int in_channels = 3;
  int num_classes = 3;
  int ignore_index = 255;
  int reference_size = 64;  // training side length; sizes the positional table
  std::uint64_t seed = 0;
  AfdConfig afd;
  HfBranchConfig hf;
  LfBranchConfig lf;
  FusionConfig fusion;
  LossWeights loss;
  OptimizerConfig optim;
  BranchToggles branches;

  /// Throws ConfigError naming the offending field(s).
  void validate() const;
  /// Side lengths the padded input must be a multiple of.
  int spatial_multiple() const;
  int min_side() const;
};

/// Small configuration that trains in well under a second per 10 steps on
/// 64x64 inputs; mirrors configs/toy.json.
F2NetConfig toy_config();

nlohmann::json to_json(const F2NetConfig& cfg);
/// Strict conversion: unknown keys and type mismatches raise ConfigError
/// naming the dotted field path. Missing keys keep their defaults.
F2NetConfig config_from_json(const nlohmann::json& j);
/// Applies `key.path=value` overrides on top of `base`. Values parse as JSON
/// when possible, otherwise as strings.
nlohmann::json apply_overrides(nlohmann::json base, const std::vector<std::string>& overrides);
/// Reads a UTF-8 JSON file (empty path: all defaults), applies overrides,
/// validates.
F2NetConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace f2net
