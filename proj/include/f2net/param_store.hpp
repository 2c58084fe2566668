// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "f2net/tensor.hpp"

namespace f2net {

/// Which part of the network a parameter belongs to. The three encoder tags
/// are the ones whose gradient norms get balanced during training.
enum class BranchTag { Stem, HighFreq, ShortRange, LongRange, Fusion, Head };

std::string_view to_string(BranchTag tag);
std::optional<BranchTag> parse_branch_tag(std::string_view name);
inline constexpr BranchTag kBalancedBranches[] = {BranchTag::HighFreq, BranchTag::ShortRange,
                                                  BranchTag::LongRange};

template <typename T>
struct Parameter {
  std::string path;
  BranchTag tag;
  Tensor<T> value;
  std::vector<T> momentum;
  bool trainable = true;
};

template <typename T>
class ParamStore {
 public:
  /// Registers a leaf tensor. Paths must be unique.
  Tensor<T> add(std::string path, BranchTag tag, Tensor<T> value, bool trainable = true);

  Parameter<T>* find(std::string_view path);
  const Parameter<T>* find(std::string_view path) const;
  Parameter<T>& at(std::string_view path);

  std::span<Parameter<T>> params() { return params_; }
  std::span<const Parameter<T>> params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t numel() const;

  void zero_grad();

 private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Seeded parameter initialiser: fan-in scaled normals for weights, zeros
/// for biases.
template <typename T>
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor<T> kaiming(Shape shape, int fan_in);
  Tensor<T> normal(Shape shape, double stddev);
  Tensor<T> zeros(Shape shape) { return Tensor<T>::zeros(std::move(shape)); }
  Tensor<T> ones(Shape shape) { return Tensor<T>::full(std::move(shape), T(1)); }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace f2net
