// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/lf_branch.hpp"

#include <cmath>

namespace f2net {

namespace {
constexpr double kNormEps = 1e-5;
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  if (q.rank() != 2 || q.shape() != k.shape() || k.shape() != v.shape()) {
    throw DimensionError("attention: q/k/v must share one [T, dh] shape, got " + shape_str(q.shape()) +
                         ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const T inv = T(1) / std::sqrt(static_cast<T>(q.dim(1)));
  Tensor<T> scores = softmax(scale(matmul(q, transpose(k)), inv), 1);
  return matmul(scores, v);
}

template <typename T>
ShortRangeBranch<T>::ShortRangeBranch(const LfBranchConfig& cfg, int in_channels,
                                      ParamStore<T>& store, Initializer<T>& init,
                                      const std::string& prefix)
    : cfg_(cfg) {
  const BranchTag tag = BranchTag::ShortRange;
  const int c = cfg.short_channels;
  stem_weight = store.add(prefix + "/stem/weight", tag, init.kaiming({3, 3, in_channels, c}, 9 * in_channels));
  stem_bias = store.add(prefix + "/stem/bias", tag, init.zeros({c}));
  for (int b = 0; b < cfg.short_blocks; ++b) {
    const std::string p = prefix + "/block" + std::to_string(b);
    ResidualConvBlock<T> blk;
    blk.conv1_weight = store.add(p + "/conv1/weight", tag, init.kaiming({3, 3, c, c}, 9 * c));
    blk.conv1_bias = store.add(p + "/conv1/bias", tag, init.zeros({c}));
    blk.norm_gamma = store.add(p + "/norm/gamma", tag, init.ones({c}));
    blk.norm_beta = store.add(p + "/norm/beta", tag, init.zeros({c}));
    blk.conv2_weight = store.add(p + "/conv2/weight", tag, init.kaiming({3, 3, c, c}, 9 * c));
    blk.conv2_bias = store.add(p + "/conv2/bias", tag, init.zeros({c}));
    blocks.push_back(std::move(blk));
  }
}

template <typename T>
Tensor<T> ShortRangeBranch<T>::downsample(const Tensor<T>& lf_down) const {
  return conv2d(lf_down, stem_weight, stem_bias, 2, Padding::Replicate);
}

template <typename T>
Tensor<T> ShortRangeBranch<T>::forward(const Tensor<T>& lf_down) const {
  Tensor<T> s = downsample(lf_down);
  for (const auto& b : blocks) {
    Tensor<T> r = conv2d(s, b.conv1_weight, b.conv1_bias, 1, Padding::Replicate);
    r = gelu(layernorm(r, b.norm_gamma, b.norm_beta, T(kNormEps)));
    r = conv2d(r, b.conv2_weight, b.conv2_bias, 1, Padding::Replicate);
    s = add(s, r);
  }
  return s;
}

template <typename T>
LongRangeBranch<T>::LongRangeBranch(const LfBranchConfig& cfg, int in_channels, int reference_grid,
                                    ParamStore<T>& store, Initializer<T>& init,
                                    const std::string& prefix)
    : cfg_(cfg) {
  const BranchTag tag = BranchTag::LongRange;
  const int d = cfg.long_dim, p = cfg.patch_size, feat = p * p * in_channels;
  const int g = std::max(1, reference_grid);
  patch_weight = store.add(prefix + "/patch/weight", tag, init.kaiming({feat, d}, feat));
  patch_bias = store.add(prefix + "/patch/bias", tag, init.zeros({d}));
  position = store.add(prefix + "/position", tag, init.zeros({g, g, d}));
  const int hidden = 4 * d;
  for (int l = 0; l < cfg.long_layers; ++l) {
    const std::string s = prefix + "/layer" + std::to_string(l);
    AttentionLayer<T> a;
    a.norm1_gamma = store.add(s + "/norm1/gamma", tag, init.ones({d}));
    a.norm1_beta = store.add(s + "/norm1/beta", tag, init.zeros({d}));
    a.q_weight = store.add(s + "/attn/q/weight", tag, init.kaiming({d, d}, d));
    a.q_bias = store.add(s + "/attn/q/bias", tag, init.zeros({d}));
    // No key bias: it shifts every score in a row equally, so softmax ignores it.
    a.k_weight = store.add(s + "/attn/k/weight", tag, init.kaiming({d, d}, d));
    a.v_weight = store.add(s + "/attn/v/weight", tag, init.kaiming({d, d}, d));
    a.v_bias = store.add(s + "/attn/v/bias", tag, init.zeros({d}));
    a.proj_weight = store.add(s + "/attn/proj/weight", tag, init.kaiming({d, d}, d));
    a.proj_bias = store.add(s + "/attn/proj/bias", tag, init.zeros({d}));
    a.norm2_gamma = store.add(s + "/norm2/gamma", tag, init.ones({d}));
    a.norm2_beta = store.add(s + "/norm2/beta", tag, init.zeros({d}));
    a.ffn_weight1 = store.add(s + "/ffn/fc1/weight", tag, init.kaiming({d, hidden}, d));
    a.ffn_bias1 = store.add(s + "/ffn/fc1/bias", tag, init.zeros({hidden}));
    a.ffn_weight2 = store.add(s + "/ffn/fc2/weight", tag, init.kaiming({hidden, d}, hidden));
    a.ffn_bias2 = store.add(s + "/ffn/fc2/bias", tag, init.zeros({d}));
    layers.push_back(std::move(a));
  }
  final_gamma = store.add(prefix + "/norm/gamma", tag, init.ones({d}));
  final_beta = store.add(prefix + "/norm/beta", tag, init.zeros({d}));
}

template <typename T>
Tensor<T> LongRangeBranch<T>::self_attention(const Tensor<T>& x, const AttentionLayer<T>& a) const {
  Tensor<T> q = linear(x, a.q_weight, a.q_bias);
  Tensor<T> k = linear(x, a.k_weight);
  Tensor<T> v = linear(x, a.v_weight, a.v_bias);
  const int heads = cfg_.long_heads, dh = cfg_.long_dim / heads;
  std::vector<Tensor<T>> outs;
  for (int h = 0; h < heads; ++h) {
    const int b = h * dh, e = b + dh;
    outs.push_back(heads == 1 ? attention(q, k, v)
                              : attention(slice(q, 1, b, e), slice(k, 1, b, e), slice(v, 1, b, e)));
  }
  Tensor<T> merged = heads == 1 ? outs[0] : concat(outs, 1);
  return linear(merged, a.proj_weight, a.proj_bias);
}

template <typename T>
Tensor<T> LongRangeBranch<T>::forward(const Tensor<T>& lf_down) const {
  const int p = cfg_.patch_size, d = cfg_.long_dim;
  if (lf_down.dim(0) % p != 0 || lf_down.dim(1) % p != 0) {
    throw ConfigError("long-range branch: patch size " + std::to_string(p) + " does not divide " +
                      shape_str(lf_down.shape()) + "; pad the input first");
  }
  const int gh = lf_down.dim(0) / p, gw = lf_down.dim(1) / p;
  Tensor<T> x = linear(patchify(lf_down, p), patch_weight, patch_bias);
  Tensor<T> pos = position.dim(0) == gh && position.dim(1) == gw ? position
                                                                 : bilinear_resize(position, gh, gw);
  x = add(x, reshape(pos, {gh * gw, d}));
  for (const auto& a : layers) {
    x = add(x, self_attention(layernorm(x, a.norm1_gamma, a.norm1_beta, T(kNormEps)), a));
    Tensor<T> n = layernorm(x, a.norm2_gamma, a.norm2_beta, T(kNormEps));
    x = add(x, linear(gelu(linear(n, a.ffn_weight1, a.ffn_bias1)), a.ffn_weight2, a.ffn_bias2));
  }
  x = layernorm(x, final_gamma, final_beta, T(kNormEps));
  return reshape(x, {gh, gw, d});
}

template Tensor<float> attention(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> attention(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);
template class ShortRangeBranch<float>;
template class ShortRangeBranch<double>;
template class LongRangeBranch<float>;
template class LongRangeBranch<double>;

}  // namespace f2net
