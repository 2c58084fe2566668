// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/afd.hpp"

#include <cmath>
#include <string>

namespace f2net {

template <typename T>
Tensor<T> derive_highpass_kernels(const Tensor<T>& lowpass, HighpassMode mode) {
  const int taps = lowpass.dim(-1);
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(taps))));
  if (k * k != taps || k % 2 == 0) {
    throw ConfigError("derive_highpass_kernels: " + std::to_string(taps) +
                      " taps is not an odd square kernel");
  }
  Tensor<T> base = Tensor<T>::zeros(lowpass.shape());
  auto b = base.mutable_data();
  const std::size_t pixels = lowpass.numel() / static_cast<std::size_t>(taps);
  const int center = taps / 2;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (mode == HighpassMode::Identity) {
      b[p * taps + center] = T(1);
    } else {
      for (int t = 0; t < taps; ++t) b[p * taps + t] = T(1);
    }
  }
  return sub(base, lowpass);
}

template <typename T>
Tensor<T> downsample_lf(const Tensor<T>& lf, int factor) {
  if (factor <= 0) throw ConfigError("downsample_lf: factor must be positive");
  if (factor == 1) return lf;
  const int h = lf.dim(0), w = lf.dim(1);
  if (h % factor != 0 || w % factor != 0) {
    throw ConfigError("downsample_lf: factor " + std::to_string(factor) + " does not divide " +
                      shape_str(lf.shape()));
  }
  return bilinear_resize(lf, h / factor, w / factor);
}

template <typename T>
FrequencyDecomposer<T>::FrequencyDecomposer(const AfdConfig& cfg, int in_channels,
                                            ParamStore<T>& store, Initializer<T>& init,
                                            const std::string& prefix)
    : cfg_(cfg), in_channels_(in_channels) {
  if (cfg.groups < 1 || cfg.embed_dim % cfg.groups != 0) {
    throw ConfigError("afd.groups (" + std::to_string(cfg.groups) + ") must divide afd.embed_dim (" +
                      std::to_string(cfg.embed_dim) + ")");
  }
  if (cfg.kernel_size % 2 == 0) throw ConfigError("afd.kernel_size must be odd");
  const int d = cfg.embed_dim, gw = group_width(), k = cfg.kernel_size;
  stem_weight = store.add(prefix + "/conv/weight", BranchTag::Stem,
                          init.kaiming({1, 1, in_channels, d}, in_channels));
  stem_bias = store.add(prefix + "/conv/bias", BranchTag::Stem, init.zeros({d}));
  for (int g = 0; g < cfg.groups; ++g) {
    const std::string p = prefix + "/afd/group" + std::to_string(g);
    generator_weight.push_back(
        store.add(p + "/weight", BranchTag::Stem, init.kaiming({k, k, gw, k * k}, k * k * gw)));
    generator_bias.push_back(store.add(p + "/bias", BranchTag::Stem, init.zeros({k * k})));
  }
}

template <typename T>
Tensor<T> FrequencyDecomposer<T>::stem(const Tensor<T>& image) const {
  if (image.rank() != 3 || image.dim(2) != in_channels_) {
    throw DimensionError("stem: expected [H, W, " + std::to_string(in_channels_) + "] image, got " +
                         shape_str(image.shape()));
  }
  return conv2d(image, stem_weight, stem_bias, 1, Padding::Replicate);
}

template <typename T>
Tensor<T> FrequencyDecomposer<T>::build_lowpass_kernels(const Tensor<T>& group_features,
                                                        int group) const {
  return softmax(conv2d(group_features, generator_weight.at(group), generator_bias.at(group), 1,
                        Padding::Replicate),
                 -1);
}

template <typename T>
FrequencyPair<T> FrequencyDecomposer<T>::decompose(const Tensor<T>& features) const {
  if (features.rank() != 3 || features.dim(2) != cfg_.embed_dim) {
    throw DimensionError("decompose: expected " + std::to_string(cfg_.embed_dim) +
                         " channels, got " + shape_str(features.shape()));
  }
  FrequencyPair<T> out;
  std::vector<Tensor<T>> lf_parts, hf_parts;
  const int gw = group_width();
  for (int g = 0; g < cfg_.groups; ++g) {
    Tensor<T> xg = cfg_.groups == 1 ? features : slice(features, 2, g * gw, (g + 1) * gw);
    Tensor<T> lowpass = build_lowpass_kernels(xg, g);
    Tensor<T> highpass = derive_highpass_kernels(lowpass, cfg_.highpass_mode);
    lf_parts.push_back(dynamic_depthwise_conv(xg, lowpass, Padding::Replicate));
    hf_parts.push_back(dynamic_depthwise_conv(xg, highpass, Padding::Replicate));
    out.lowpass_kernels.push_back(std::move(lowpass));
    out.highpass_kernels.push_back(std::move(highpass));
  }
  out.lf = cfg_.groups == 1 ? lf_parts[0] : concat(lf_parts, 2);
  out.hf = cfg_.groups == 1 ? hf_parts[0] : concat(hf_parts, 2);
  return out;
}

template Tensor<float> derive_highpass_kernels(const Tensor<float>&, HighpassMode);
template Tensor<double> derive_highpass_kernels(const Tensor<double>&, HighpassMode);
template Tensor<float> downsample_lf(const Tensor<float>&, int);
template Tensor<double> downsample_lf(const Tensor<double>&, int);
template class FrequencyDecomposer<float>;
template class FrequencyDecomposer<double>;

}  // namespace f2net
