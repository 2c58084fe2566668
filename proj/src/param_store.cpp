// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace f2net {

std::string_view to_string(BranchTag tag) {
  switch (tag) {
    case BranchTag::Stem: return "stem";
    case BranchTag::HighFreq: return "highfreq";
    case BranchTag::ShortRange: return "shortrange";
    case BranchTag::LongRange: return "longrange";
    case BranchTag::Fusion: return "fusion";
    case BranchTag::Head: return "head";
  }
  return "unknown";
}

std::optional<BranchTag> parse_branch_tag(std::string_view name) {
  for (BranchTag t : {BranchTag::Stem, BranchTag::HighFreq, BranchTag::ShortRange,
                      BranchTag::LongRange, BranchTag::Fusion, BranchTag::Head}) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

template <typename T>
Tensor<T> ParamStore<T>::add(std::string path, BranchTag tag, Tensor<T> value, bool trainable) {
  if (index_.count(path)) throw std::invalid_argument("duplicate parameter path: " + path);
  value.set_requires_grad(trainable);
  index_.emplace(path, params_.size());
  std::vector<T> momentum(value.numel(), T(0));
  params_.push_back({std::move(path), tag, value, std::move(momentum), trainable});
  return value;
}

template <typename T>
Parameter<T>* ParamStore<T>::find(std::string_view path) {
  auto it = index_.find(std::string(path));
  return it == index_.end() ? nullptr : &params_[it->second];
}

template <typename T>
const Parameter<T>* ParamStore<T>::find(std::string_view path) const {
  auto it = index_.find(std::string(path));
  return it == index_.end() ? nullptr : &params_[it->second];
}

template <typename T>
Parameter<T>& ParamStore<T>::at(std::string_view path) {
  if (auto* p = find(path)) return *p;
  throw std::out_of_range("unknown parameter path: " + std::string(path));
}

template <typename T>
std::size_t ParamStore<T>::numel() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <typename T>
Tensor<T> Initializer<T>::kaiming(Shape shape, int fan_in) {
  return normal(std::move(shape), std::sqrt(2.0 / std::max(1, fan_in)));
}

template <typename T>
Tensor<T> Initializer<T>::normal(Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> v(shape_numel(shape));
  for (T& x : v) x = static_cast<T>(dist(rng_));
  return Tensor<T>::from(std::move(shape), std::move(v));
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Initializer<float>;
template class Initializer<double>;

}  // namespace f2net
