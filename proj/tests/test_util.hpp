// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Shared helpers for the unit tests: seeded random tensors and plain-loop
// reference implementations used as oracles.

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "f2net/ops.hpp"

namespace f2net::testing {

using TD = Tensor<double>;

inline TD randn(std::mt19937_64& rng, Shape s, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> v(shape_numel(s));
  for (auto& x : v) x = n(rng);
  return TD::from(std::move(s), std::move(v));
}

inline Tensor<float> randu_image(std::mt19937_64& rng, int h, int w, int c = 3) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(h) * w * c);
  for (auto& x : v) x = u(rng);
  return Tensor<float>::from({h, w, c}, std::move(v));
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

template <typename T>
void fill(Tensor<T>& t, T v) {
  for (auto& x : t.mutable_data()) x = v;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Six nested loops, replicate padding, arbitrary stride.
inline std::vector<double> conv2d_loops(const TD& x, const TD& w, const TD& b, int stride) {
  const int H = x.dim(0), W = x.dim(1), Ci = x.dim(2), k = w.dim(0), Co = w.dim(3), r = k / 2;
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  std::vector<double> out(static_cast<std::size_t>(Ho) * Wo * Co, 0.0);
  for (int i = 0; i < Ho; ++i)
    for (int j = 0; j < Wo; ++j)
      for (int o = 0; o < Co; ++o) {
        double s = b.defined() ? b[o] : 0.0;
        for (int di = 0; di < k; ++di)
          for (int dj = 0; dj < k; ++dj)
            for (int c = 0; c < Ci; ++c) {
              const int y = clampi(i * stride + di - r, 0, H - 1), xx = clampi(j * stride + dj - r, 0, W - 1);
              s += x[(static_cast<std::size_t>(y) * W + xx) * Ci + c] * w[((di * k + dj) * Ci + c) * Co + o];
            }
        out[(static_cast<std::size_t>(i) * Wo + j) * Co + o] = s;
      }
  return out;
}

// Per-pixel window sum with the pixel's own k x k kernel.
inline std::vector<double> dwconv_loops(const TD& x, const TD& kern) {
  const int H = x.dim(0), W = x.dim(1), C = x.dim(2), kk = kern.dim(2);
  const int k = static_cast<int>(std::lround(std::sqrt(kk))), r = k / 2;
  std::vector<double> out(x.numel(), 0.0);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      for (int c = 0; c < C; ++c) {
        double s = 0;
        for (int di = 0; di < k; ++di)
          for (int dj = 0; dj < k; ++dj) {
            const int y = clampi(i + di - r, 0, H - 1), xx = clampi(j + dj - r, 0, W - 1);
            s += kern[(static_cast<std::size_t>(i) * W + j) * kk + di * k + dj] *
                 x[(static_cast<std::size_t>(y) * W + xx) * C + c];
          }
        out[(static_cast<std::size_t>(i) * W + j) * C + c] = s;
      }
  return out;
}

// softmax(q k^T / sqrt(d)) v with explicit loops.
inline std::vector<double> attention_loops(const TD& q, const TD& k, const TD& v) {
  const int T = q.dim(0), d = q.dim(1), dv = v.dim(1);
  std::vector<double> out(static_cast<std::size_t>(T) * dv, 0.0);
  for (int t = 0; t < T; ++t) {
    std::vector<double> s(T);
    double mx = -1e300;
    for (int u = 0; u < T; ++u) {
      double dot = 0;
      for (int c = 0; c < d; ++c) dot += q[t * d + c] * k[u * d + c];
      s[u] = dot / std::sqrt(double(d));
      mx = std::max(mx, s[u]);
    }
    double z = 0;
    for (auto& e : s) z += (e = std::exp(e - mx));
    for (int u = 0; u < T; ++u)
      for (int c = 0; c < dv; ++c) out[t * dv + c] += s[u] / z * v[u * dv + c];
  }
  return out;
}

// Mean over rows of 0.5 [KL(p||q) + KL(q||p)].
inline double symmetric_kl_loops(const TD& p, const TD& q) {
  const int C = p.shape().back();
  const std::size_t rows = p.numel() / C;
  double total = 0;
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) {
      const double a = p[r * C + c], b = q[r * C + c];
      total += 0.5 * (a * std::log(a / b) + b * std::log(b / a));
    }
  return total / static_cast<double>(rows);
}

inline std::vector<double> as_vector(const TD& t) { return {t.data().begin(), t.data().end()}; }

inline double max_abs_diff(const std::vector<double>& a, const TD& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("f2net_test_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace f2net::testing
