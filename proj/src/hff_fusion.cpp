// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/hff_fusion.hpp"

#include <algorithm>
#include <tuple>

namespace f2net {

template <typename T>
Tensor<T> channel_attention(const Tensor<T>& features, const Mlp<T>& mlp) {
  return sigmoid(mlp(spatial_avg_pool(features)));
}

template <typename T>
Tensor<T> cross_branch_matrix(const Tensor<T>& attn_a, const Tensor<T>& attn_b) {
  return sigmoid(outer(attn_a, attn_b));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> refine_attentions(const Tensor<T>& matrix, const Tensor<T>& attn_a,
                                                  const Tensor<T>& attn_b, const Mlp<T>& refine_a,
                                                  const Mlp<T>& refine_b) {
  Tensor<T> flat = reshape(matrix, {static_cast<int>(matrix.numel())});
  return {sigmoid(add(refine_a(flat), attn_a)), sigmoid(add(refine_b(flat), attn_b))};
}

namespace {
template <typename T>
Mlp<T> make_mlp(ParamStore<T>& store, const std::string& prefix, int in, int hidden, int out,
                Initializer<T>& init, bool zero_output) {
  Mlp<T> m;
  m.weight1 = store.add(prefix + "/fc1/weight", BranchTag::Fusion, init.kaiming({in, hidden}, in));
  m.bias1 = store.add(prefix + "/fc1/bias", BranchTag::Fusion, init.zeros({hidden}));
  m.weight2 = store.add(prefix + "/fc2/weight", BranchTag::Fusion,
                        zero_output ? init.zeros({hidden, out}) : init.kaiming({hidden, out}, hidden));
  m.bias2 = store.add(prefix + "/fc2/bias", BranchTag::Fusion, init.zeros({out}));
  return m;
}
}  // namespace

template <typename T>
HybridFrequencyFusion<T>::HybridFrequencyFusion(int ca, int cb, int squeeze_ratio,
                                                ParamStore<T>& store, Initializer<T>& init,
                                                const std::string& prefix, int fused_channels)
    : ca_(ca), cb_(cb), cf_(fused_channels > 0 ? fused_channels : std::max(ca, cb)) {
  const int r = std::max(1, squeeze_ratio);
  attention_a = make_mlp(store, prefix + "/attn_a", ca, std::max(1, ca / r), ca, init, false);
  attention_b = make_mlp(store, prefix + "/attn_b", cb, std::max(1, cb / r), cb, init, false);
  const int hidden = std::max(ca, cb);
  // Output layers start at zero so refinement begins as the pure skip sigmoid(A).
  refine_a = make_mlp(store, prefix + "/refine_a", ca * cb, hidden, ca, init, true);
  refine_b = make_mlp(store, prefix + "/refine_b", ca * cb, hidden, cb, init, true);
  align_a_weight = store.add(prefix + "/align_a/weight", BranchTag::Fusion, init.kaiming({1, 1, ca, cf_}, ca));
  align_a_bias = store.add(prefix + "/align_a/bias", BranchTag::Fusion, init.zeros({cf_}));
  align_b_weight = store.add(prefix + "/align_b/weight", BranchTag::Fusion, init.kaiming({1, 1, cb, cf_}, cb));
  align_b_bias = store.add(prefix + "/align_b/bias", BranchTag::Fusion, init.zeros({cf_}));
}

template <typename T>
FusionTrace<T> HybridFrequencyFusion<T>::trace(const Tensor<T>& fa, const Tensor<T>& fb) const {
  if (fa.rank() != 3 || fb.rank() != 3 || fa.dim(0) != fb.dim(0) || fa.dim(1) != fb.dim(1)) {
    throw DimensionError("fuse: spatial mismatch " + shape_str(fa.shape()) + " vs " +
                         shape_str(fb.shape()));
  }
  if (fa.dim(2) != ca_ || fb.dim(2) != cb_) {
    throw DimensionError("fuse: expected " + std::to_string(ca_) + "/" + std::to_string(cb_) +
                         " channels, got " + shape_str(fa.shape()) + " and " + shape_str(fb.shape()));
  }
  FusionTrace<T> t;
  t.attn_a = channel_attention(fa, attention_a);
  t.attn_b = channel_attention(fb, attention_b);
  t.matrix = cross_branch_matrix(t.attn_a, t.attn_b);
  std::tie(t.refined_a, t.refined_b) = refine_attentions(t.matrix, t.attn_a, t.attn_b, refine_a, refine_b);
  t.output = add(conv2d(mul_channels(fa, t.refined_a), align_a_weight, align_a_bias),
                 conv2d(mul_channels(fb, t.refined_b), align_b_weight, align_b_bias));
  return t;
}

#define F2NET_HFF_INSTANTIATE(T)                                                                  \
  template Tensor<T> channel_attention(const Tensor<T>&, const Mlp<T>&);                          \
  template Tensor<T> cross_branch_matrix(const Tensor<T>&, const Tensor<T>&);                     \
  template std::pair<Tensor<T>, Tensor<T>> refine_attentions(                                     \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Mlp<T>&, const Mlp<T>&);        \
  template class HybridFrequencyFusion<T>;

F2NET_HFF_INSTANTIATE(float)
F2NET_HFF_INSTANTIATE(double)

}  // namespace f2net
