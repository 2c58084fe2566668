// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Differentiable primitives. Spatial tensors are channels-last [H, W, C];
// token tensors are [T, C]. All ops accept float and double tensors.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "f2net/tensor.hpp"

namespace f2net {

enum class Padding { Replicate, Zero };

enum class ScanDirection { RowForward, RowBackward, ColForward, ColBackward };

// Elementwise.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
/// tanh-form GELU; smooth everywhere, which keeps finite-difference checks clean.
template <typename T> Tensor<T> gelu(const Tensor<T>& a);

// Reductions.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

// Layout.
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T> Tensor<T> slice(const Tensor<T>& a, int axis, int begin, int end);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
template <typename T> Tensor<T> pad_replicate(const Tensor<T>& x, int top, int left, int bottom, int right);
template <typename T> Tensor<T> crop(const Tensor<T>& x, int top, int left, int height, int width);
/// [H, W, C] -> [(H/p)(W/p), p*p*C], patches in row-major order.
template <typename T> Tensor<T> patchify(const Tensor<T>& x, int patch);

// Linear algebra.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> outer(const Tensor<T>& a, const Tensor<T>& b);
/// x[..., Cin] @ weight[Cin, Cout] + bias[Cout]; bias may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias = {});
/// x[..., C] scaled per channel by v[C].
template <typename T> Tensor<T> mul_channels(const Tensor<T>& x, const Tensor<T>& v);

// Spatial.
/// weight is [k, k, Cin, Cout] with odd k; padding is k/2 on every side.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias = {},
                 int stride = 1, Padding padding = Padding::Replicate);
/// Per-pixel k x k kernels [H, W, k*k] shared by every channel of input.
template <typename T>
Tensor<T> dynamic_depthwise_conv(const Tensor<T>& input, const Tensor<T>& kernels,
                                 Padding padding = Padding::Replicate);
template <typename T> Tensor<T> spatial_avg_pool(const Tensor<T>& x);
/// Half-pixel-centred bilinear resampling. Border samples that fall outside
/// the source grid are linearly extrapolated rather than clamped, so planar
/// fields are reproduced exactly at any scale.
template <typename T> Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w);

// Normalisation.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

/// h_t = gate_t * h_{t-1} + (1 - gate_t) * value_t along the scan order,
/// with h_{-1} = 0. gate must lie in (0, 1).
template <typename T>
Tensor<T> directional_scan(const Tensor<T>& gate, const Tensor<T>& value, ScanDirection dir);

// Losses.
/// Mean over non-ignored positions of -log softmax(logits)[label]. Throws
/// std::domain_error when every position is ignored.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                        std::optional<int> ignore_index = std::nullopt);
/// Mean over positions of 0.5 [KL(p||q) + KL(q||p)] along the last axis.
/// Probabilities are floored at eps and renormalised before the logs.
template <typename T>
Tensor<T> symmetric_kl(const Tensor<T>& p, const Tensor<T>& q, T eps = T(1e-8));

}  // namespace f2net
