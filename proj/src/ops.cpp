// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "f2net/parallel.hpp"

namespace f2net {

namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& a, int rank) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
  }
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// Resolves a padded source coordinate; -1 means "zero padding, skip".
inline int source_index(int i, int n, Padding pad) {
  if (i >= 0 && i < n) return i;
  return pad == Padding::Replicate ? clamp_index(i, n) : -1;
}

template <typename T>
T* grad_of(Node<T>& out, std::size_t parent) {
  Node<T>& p = *out.parents[parent];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

template <typename T>
const T* data_of(const Node<T>& out, std::size_t parent) {
  return out.parents[parent]->data.data();
}

}  // namespace

// ---------------------------------------------------------------- elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (T* g = grad_of(o, p)) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (T* g = grad_of(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](Node<T>& o) {
    const T* av = data_of(o, 0);
    const T* bv = data_of(o, 1);
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * bv[i];
    }
    if (T* g = grad_of(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * av[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  return make_result<T>(a.shape(), std::move(out), {a}, [s](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * s;
    }
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + s;
  return make_result<T>(a.shape(), std::move(out), {a}, [](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a[i];
    // Branching on sign keeps exp() from overflowing.
    out[i] = x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  }
  return make_result<T>(a.shape(), std::move(out), {a}, [](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const T y = o.data[i];
        g[i] += o.grad[i] * y * (T(1) - y);
      }
    }
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a[i];
    out[i] = T(0.5) * x * (T(1) + std::tanh(kC * (x + kA * x * x * x)));
  }
  return make_result<T>(a.shape(), std::move(out), {a}, [](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      const T* x = data_of(o, 0);
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const T xi = x[i];
        const T t = std::tanh(kC * (xi + kA * xi * xi * xi));
        const T d = T(0.5) * (T(1) + t) +
                    T(0.5) * xi * (T(1) - t * t) * kC * (T(1) + T(3) * kA * xi * xi);
        g[i] += o.grad[i] * d;
      }
    }
  });
}

// ----------------------------------------------------------------- reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  return make_result<T>({1}, {s}, {a}, [](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      const std::size_t n = o.parents[0]->data.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

// --------------------------------------------------------------------- layout

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  return make_result<T>(std::move(shape), std::move(out), {a}, [](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

namespace {
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= static_cast<std::size_t>(s[i]);
  r.extent = static_cast<std::size_t>(s[axis]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) {
    r.inner *= static_cast<std::size_t>(s[i]);
  }
  return r;
}

int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError(std::string(op) + ": axis out of range");
  }
  return axis;
}
}  // namespace

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, int begin, int end) {
  axis = normalize_axis(axis, a.rank(), "slice");
  if (begin < 0 || end > a.dim(axis) || begin >= end) {
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_str(a.shape()));
  }
  const AxisSplit sp = split_at(a.shape(), axis);
  const std::size_t width = static_cast<std::size_t>(end - begin) * sp.inner;
  const std::size_t offset = static_cast<std::size_t>(begin) * sp.inner;
  const std::size_t stride = sp.extent * sp.inner;
  std::vector<T> out(sp.outer * width);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(a.data().data() + o * stride + offset, width, out.data() + o * width);
  }
  Shape shape = a.shape();
  shape[static_cast<std::size_t>(axis)] = end - begin;
  return make_result<T>(std::move(shape), std::move(out), {a},
                        [outer = sp.outer, width, offset, stride](Node<T>& o) {
                          if (T* g = grad_of(o, 0)) {
                            for (std::size_t r = 0; r < outer; ++r) {
                              T* dst = g + r * stride + offset;
                              const T* src = o.grad.data() + r * width;
                              for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  axis = normalize_axis(axis, parts[0].rank(), "concat");
  Shape shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != shape.size()) {
      throw DimensionError("concat: rank mismatch " + shape_str(shape) + " vs " + shape_str(probe));
    }
    probe[static_cast<std::size_t>(axis)] = shape[static_cast<std::size_t>(axis)];
    if (probe != shape) {
      throw DimensionError("concat: shape mismatch " + shape_str(shape) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.dim(axis);
  }
  shape[static_cast<std::size_t>(axis)] = total;
  const AxisSplit sp = split_at(shape, axis);
  const std::size_t out_stride = sp.extent * sp.inner;
  std::vector<T> out(sp.outer * out_stride);
  std::vector<std::size_t> offsets, widths;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = static_cast<std::size_t>(p.dim(axis)) * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(p.data().data() + o * w, w, out.data() + o * out_stride + off);
    }
    offsets.push_back(off);
    widths.push_back(w);
    off += w;
  }
  return make_result<T>(std::move(shape), std::move(out), parts,
                        [outer = sp.outer, out_stride, offsets, widths](Node<T>& o) {
                          for (std::size_t p = 0; p < offsets.size(); ++p) {
                            T* g = grad_of(o, p);
                            if (!g) continue;
                            const std::size_t w = widths[p];
                            for (std::size_t r = 0; r < outer; ++r) {
                              const T* src = o.grad.data() + r * out_stride + offsets[p];
                              for (std::size_t i = 0; i < w; ++i) g[r * w + i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank("transpose", a, 2);
  const int m = a.dim(0), n = a.dim(1);
  std::vector<T> out(a.numel());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return make_result<T>({n, m}, std::move(out), {a}, [m, n](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) g[i * n + j] += o.grad[j * m + i];
    }
  });
}

template <typename T>
Tensor<T> pad_replicate(const Tensor<T>& x, int top, int left, int bottom, int right) {
  require_rank("pad_replicate", x, 3);
  if (top < 0 || left < 0 || bottom < 0 || right < 0) {
    throw DimensionError("pad_replicate: negative padding");
  }
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int oh = h + top + bottom, ow = w + left + right;
  std::vector<T> out(static_cast<std::size_t>(oh) * ow * c);
  for (int i = 0; i < oh; ++i) {
    const int si = clamp_index(i - top, h);
    for (int j = 0; j < ow; ++j) {
      const int sj = clamp_index(j - left, w);
      std::copy_n(x.data().data() + (static_cast<std::size_t>(si) * w + sj) * c, c,
                  out.data() + (static_cast<std::size_t>(i) * ow + j) * c);
    }
  }
  return make_result<T>({oh, ow, c}, std::move(out), {x}, [=](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (int i = 0; i < oh; ++i) {
        const int si = clamp_index(i - top, h);
        for (int j = 0; j < ow; ++j) {
          const int sj = clamp_index(j - left, w);
          T* dst = g + (static_cast<std::size_t>(si) * w + sj) * c;
          const T* src = o.grad.data() + (static_cast<std::size_t>(i) * ow + j) * c;
          for (int k = 0; k < c; ++k) dst[k] += src[k];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int top, int left, int height, int width) {
  require_rank("crop", x, 3);
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > h || left + width > w) {
    throw DimensionError("crop: window out of range for " + shape_str(x.shape()));
  }
  std::vector<T> out(static_cast<std::size_t>(height) * width * c);
  for (int i = 0; i < height; ++i) {
    std::copy_n(x.data().data() + (static_cast<std::size_t>(i + top) * w + left) * c,
                static_cast<std::size_t>(width) * c,
                out.data() + static_cast<std::size_t>(i) * width * c);
  }
  return make_result<T>({height, width, c}, std::move(out), {x}, [=](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (int i = 0; i < height; ++i) {
        T* dst = g + (static_cast<std::size_t>(i + top) * w + left) * c;
        const T* src = o.grad.data() + static_cast<std::size_t>(i) * width * c;
        for (int k = 0; k < width * c; ++k) dst[k] += src[k];
      }
    }
  });
}

template <typename T>
Tensor<T> patchify(const Tensor<T>& x, int patch) {
  require_rank("patchify", x, 3);
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (patch <= 0 || h % patch != 0 || w % patch != 0) {
    throw ConfigError("patchify: patch size " + std::to_string(patch) + " does not divide " +
                      shape_str(x.shape()));
  }
  const int gh = h / patch, gw = w / patch, feat = patch * patch * c;
  // Gather index: out element -> source element.
  std::vector<std::size_t> src(x.numel());
  for (int ti = 0; ti < gh; ++ti)
    for (int tj = 0; tj < gw; ++tj)
      for (int pi = 0; pi < patch; ++pi)
        for (int pj = 0; pj < patch; ++pj)
          for (int k = 0; k < c; ++k) {
            const std::size_t o = (static_cast<std::size_t>(ti) * gw + tj) * feat +
                                  (static_cast<std::size_t>(pi) * patch + pj) * c + k;
            src[o] = (static_cast<std::size_t>(ti * patch + pi) * w + tj * patch + pj) * c + k;
          }
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[src[i]];
  return make_result<T>({gh * gw, feat}, std::move(out), {x}, [src = std::move(src)](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += o.grad[i];
    }
  });
}

// -------------------------------------------------------------- linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<T> out(static_cast<std::size_t>(m) * n, T(0));
  const T* av = a.data().data();
  const T* bv = b.data().data();
  parallel_for(
      m,
      [&](int r0, int r1) {
        for (int i = r0; i < r1; ++i) {
          T* row = out.data() + static_cast<std::size_t>(i) * n;
          for (int p = 0; p < k; ++p) {
            const T s = av[static_cast<std::size_t>(i) * k + p];
            const T* brow = bv + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) row[j] += s * brow[j];
          }
        }
      },
      static_cast<long>(k) * n);
  return make_result<T>({m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& o) {
    const T* av = data_of(o, 0);
    const T* bv = data_of(o, 1);
    const T* go = o.grad.data();
    if (T* ga = grad_of(o, 0)) {
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          T s = 0;
          const T* brow = bv + static_cast<std::size_t>(p) * n;
          const T* grow = go + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
          ga[static_cast<std::size_t>(i) * k + p] += s;
        }
    }
    if (T* gb = grad_of(o, 1)) {
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const T s = av[static_cast<std::size_t>(i) * k + p];
          T* dst = gb + static_cast<std::size_t>(p) * n;
          const T* grow = go + static_cast<std::size_t>(i) * n;
          for (int j = 0; j < n; ++j) dst[j] += s * grow[j];
        }
    }
  });
}

template <typename T>
Tensor<T> outer(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("outer", a, 1);
  require_rank("outer", b, 1);
  const int m = a.dim(0), n = b.dim(0);
  std::vector<T> out(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = a[i] * b[j];
  return make_result<T>({m, n}, std::move(out), {a, b}, [m, n](Node<T>& o) {
    const T* av = data_of(o, 0);
    const T* bv = data_of(o, 1);
    T* ga = grad_of(o, 0);
    T* gb = grad_of(o, 1);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const T g = o.grad[static_cast<std::size_t>(i) * n + j];
        if (ga) ga[i] += g * bv[j];
        if (gb) gb[j] += g * av[i];
      }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank("linear(weight)", weight, 2);
  const int cin = weight.dim(0), cout = weight.dim(1);
  if (x.rank() < 1 || x.dim(-1) != cin) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  const int rows = static_cast<int>(x.numel() / cin);
  Shape shape = x.shape();
  shape.back() = cout;
  std::vector<T> out(static_cast<std::size_t>(rows) * cout);
  const T* xv = x.data().data();
  const T* wv = weight.data().data();
  const T* bv = has_bias ? bias.data().data() : nullptr;
  parallel_for(
      rows,
      [&](int r0, int r1) {
        for (int r = r0; r < r1; ++r) {
          T* row = out.data() + static_cast<std::size_t>(r) * cout;
          for (int j = 0; j < cout; ++j) row[j] = bv ? bv[j] : T(0);
          const T* xr = xv + static_cast<std::size_t>(r) * cin;
          for (int i = 0; i < cin; ++i) {
            const T s = xr[i];
            const T* wr = wv + static_cast<std::size_t>(i) * cout;
            for (int j = 0; j < cout; ++j) row[j] += s * wr[j];
          }
        }
      },
      static_cast<long>(cin) * cout);
  std::vector<Tensor<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return make_result<T>(std::move(shape), std::move(out), parents,
                        [rows, cin, cout, has_bias](Node<T>& o) {
                          const T* xv = data_of(o, 0);
                          const T* wv = data_of(o, 1);
                          const T* go = o.grad.data();
                          if (T* gx = grad_of(o, 0)) {
                            for (int r = 0; r < rows; ++r) {
                              const T* grow = go + static_cast<std::size_t>(r) * cout;
                              T* dst = gx + static_cast<std::size_t>(r) * cin;
                              for (int i = 0; i < cin; ++i) {
                                const T* wr = wv + static_cast<std::size_t>(i) * cout;
                                T s = 0;
                                for (int j = 0; j < cout; ++j) s += grow[j] * wr[j];
                                dst[i] += s;
                              }
                            }
                          }
                          if (T* gw = grad_of(o, 1)) {
                            for (int r = 0; r < rows; ++r) {
                              const T* grow = go + static_cast<std::size_t>(r) * cout;
                              const T* xr = xv + static_cast<std::size_t>(r) * cin;
                              for (int i = 0; i < cin; ++i) {
                                const T s = xr[i];
                                T* dst = gw + static_cast<std::size_t>(i) * cout;
                                for (int j = 0; j < cout; ++j) dst[j] += s * grow[j];
                              }
                            }
                          }
                          if (has_bias) {
                            if (T* gb = grad_of(o, 2)) {
                              for (int r = 0; r < rows; ++r) {
                                const T* grow = go + static_cast<std::size_t>(r) * cout;
                                for (int j = 0; j < cout; ++j) gb[j] += grow[j];
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> mul_channels(const Tensor<T>& x, const Tensor<T>& v) {
  require_rank("mul_channels(v)", v, 1);
  const int c = v.dim(0);
  if (x.rank() < 1 || x.dim(-1) != c) {
    throw DimensionError("mul_channels: " + shape_str(x.shape()) + " vs " + shape_str(v.shape()));
  }
  const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (int k = 0; k < c; ++k) out[r * c + k] = x[r * c + k] * v[k];
  return make_result<T>(x.shape(), std::move(out), {x, v}, [rows, c](Node<T>& o) {
    const T* xv = data_of(o, 0);
    const T* vv = data_of(o, 1);
    T* gx = grad_of(o, 0);
    T* gv = grad_of(o, 1);
    for (std::size_t r = 0; r < rows; ++r)
      for (int k = 0; k < c; ++k) {
        const T g = o.grad[r * c + k];
        if (gx) gx[r * c + k] += g * vv[k];
        if (gv) gv[k] += g * xv[r * c + k];
      }
  });
}

// -------------------------------------------------------------------- spatial

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 Padding padding) {
  require_rank("conv2d(input)", input, 3);
  require_rank("conv2d(weight)", weight, 4);
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int k = weight.dim(0), cout = weight.dim(3);
  if (weight.dim(1) != k || weight.dim(2) != cin) {
    throw DimensionError("conv2d: input " + shape_str(input.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  if (k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
  }
  const int pad = k / 2;
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  std::vector<T> out(static_cast<std::size_t>(oh) * ow * cout);
  const T* xv = input.data().data();
  const T* wv = weight.data().data();
  const T* bv = has_bias ? bias.data().data() : nullptr;
  parallel_for(
      oh,
      [&](int r0, int r1) {
        for (int i = r0; i < r1; ++i)
          for (int j = 0; j < ow; ++j) {
            T* acc = out.data() + (static_cast<std::size_t>(i) * ow + j) * cout;
            for (int co = 0; co < cout; ++co) acc[co] = bv ? bv[co] : T(0);
            for (int di = 0; di < k; ++di) {
              const int si = source_index(i * stride + di - pad, h, padding);
              if (si < 0) continue;
              for (int dj = 0; dj < k; ++dj) {
                const int sj = source_index(j * stride + dj - pad, w, padding);
                if (sj < 0) continue;
                const T* px = xv + (static_cast<std::size_t>(si) * w + sj) * cin;
                const T* wt = wv + (static_cast<std::size_t>(di) * k + dj) * cin * cout;
                for (int ci = 0; ci < cin; ++ci) {
                  const T s = px[ci];
                  const T* wr = wt + static_cast<std::size_t>(ci) * cout;
                  for (int co = 0; co < cout; ++co) acc[co] += s * wr[co];
                }
              }
            }
          }
      },
      static_cast<long>(ow) * k * k * cin * cout);
  std::vector<Tensor<T>> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return make_result<T>(
      {oh, ow, cout}, std::move(out), parents,
      [=](Node<T>& o) {
        const T* xv = data_of(o, 0);
        const T* wv = data_of(o, 1);
        T* gx = grad_of(o, 0);
        T* gw = grad_of(o, 1);
        T* gb = has_bias ? grad_of(o, 2) : nullptr;
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            const T* go = o.grad.data() + (static_cast<std::size_t>(i) * ow + j) * cout;
            if (gb)
              for (int co = 0; co < cout; ++co) gb[co] += go[co];
            for (int di = 0; di < k; ++di) {
              const int si = source_index(i * stride + di - pad, h, padding);
              if (si < 0) continue;
              for (int dj = 0; dj < k; ++dj) {
                const int sj = source_index(j * stride + dj - pad, w, padding);
                if (sj < 0) continue;
                const std::size_t px = (static_cast<std::size_t>(si) * w + sj) * cin;
                const std::size_t wt = (static_cast<std::size_t>(di) * k + dj) * cin * cout;
                for (int ci = 0; ci < cin; ++ci) {
                  const T* wr = wv + wt + static_cast<std::size_t>(ci) * cout;
                  if (gx) {
                    T s = 0;
                    for (int co = 0; co < cout; ++co) s += wr[co] * go[co];
                    gx[px + ci] += s;
                  }
                  if (gw) {
                    const T xs = xv[px + ci];
                    T* dst = gw + wt + static_cast<std::size_t>(ci) * cout;
                    for (int co = 0; co < cout; ++co) dst[co] += xs * go[co];
                  }
                }
              }
            }
          }
      });
}

template <typename T>
Tensor<T> dynamic_depthwise_conv(const Tensor<T>& input, const Tensor<T>& kernels, Padding padding) {
  require_rank("dynamic_depthwise_conv(input)", input, 3);
  require_rank("dynamic_depthwise_conv(kernels)", kernels, 3);
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (kernels.dim(0) != h || kernels.dim(1) != w) {
    throw ConfigError("dynamic_depthwise_conv: kernel field " + shape_str(kernels.shape()) +
                      " does not match input " + shape_str(input.shape()));
  }
  const int taps = kernels.dim(2);
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(taps))));
  if (k * k != taps || k % 2 == 0) {
    throw ConfigError("dynamic_depthwise_conv: " + std::to_string(taps) +
                      " taps is not an odd square kernel");
  }
  const int pad = k / 2;
  std::vector<T> out(input.numel(), T(0));
  const T* xv = input.data().data();
  const T* kv = kernels.data().data();
  parallel_for(
      h,
      [&](int r0, int r1) {
        for (int i = r0; i < r1; ++i)
          for (int j = 0; j < w; ++j) {
            T* acc = out.data() + (static_cast<std::size_t>(i) * w + j) * c;
            const T* kern = kv + (static_cast<std::size_t>(i) * w + j) * taps;
            for (int di = 0; di < k; ++di) {
              const int si = source_index(i + di - pad, h, padding);
              if (si < 0) continue;
              for (int dj = 0; dj < k; ++dj) {
                const int sj = source_index(j + dj - pad, w, padding);
                if (sj < 0) continue;
                const T wk = kern[di * k + dj];
                const T* px = xv + (static_cast<std::size_t>(si) * w + sj) * c;
                for (int ch = 0; ch < c; ++ch) acc[ch] += wk * px[ch];
              }
            }
          }
      },
      static_cast<long>(w) * taps * c);
  return make_result<T>(input.shape(), std::move(out), {input, kernels}, [=](Node<T>& o) {
    const T* xv = data_of(o, 0);
    const T* kv = data_of(o, 1);
    T* gx = grad_of(o, 0);
    T* gk = grad_of(o, 1);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const std::size_t pix = static_cast<std::size_t>(i) * w + j;
        const T* go = o.grad.data() + pix * c;
        for (int di = 0; di < k; ++di) {
          const int si = source_index(i + di - pad, h, padding);
          if (si < 0) continue;
          for (int dj = 0; dj < k; ++dj) {
            const int sj = source_index(j + dj - pad, w, padding);
            if (sj < 0) continue;
            const std::size_t src = (static_cast<std::size_t>(si) * w + sj) * c;
            const int tap = di * k + dj;
            if (gk) {
              T s = 0;
              for (int ch = 0; ch < c; ++ch) s += go[ch] * xv[src + ch];
              gk[pix * taps + tap] += s;
            }
            if (gx) {
              const T wk = kv[pix * taps + tap];
              for (int ch = 0; ch < c; ++ch) gx[src + ch] += wk * go[ch];
            }
          }
        }
      }
  });
}

template <typename T>
Tensor<T> spatial_avg_pool(const Tensor<T>& x) {
  require_rank("spatial_avg_pool", x, 3);
  const int c = x.dim(2);
  const std::size_t n = static_cast<std::size_t>(x.dim(0)) * x.dim(1);
  std::vector<T> out(static_cast<std::size_t>(c), T(0));
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < c; ++k) out[k] += x[p * c + k];
  const T inv = T(1) / static_cast<T>(n);
  for (T& v : out) v *= inv;
  return make_result<T>({c}, std::move(out), {x}, [n, c, inv](Node<T>& o) {
    if (T* g = grad_of(o, 0)) {
      for (std::size_t p = 0; p < n; ++p)
        for (int k = 0; k < c; ++k) g[p * c + k] += o.grad[k] * inv;
    }
  });
}

namespace {
struct ResampleAxis {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

ResampleAxis resample_axis(int in, int out) {
  ResampleAxis r;
  r.i0.resize(out);
  r.i1.resize(out);
  r.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    if (in == 1) {
      r.i0[i] = r.i1[i] = 0;
      r.frac[i] = 0.0;
      continue;
    }
    const double src = (i + 0.5) * scale - 0.5;
    const int base = std::clamp(static_cast<int>(std::floor(src)), 0, in - 2);
    r.i0[i] = base;
    r.i1[i] = base + 1;
    r.frac[i] = src - base;  // outside [0,1] only at extrapolated borders
  }
  return r;
}
}  // namespace

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w) {
  require_rank("bilinear_resize", x, 3);
  if (out_h <= 0 || out_w <= 0) throw DimensionError("bilinear_resize: non-positive target size");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (out_h == h && out_w == w) return reshape(x, x.shape());
  const ResampleAxis ry = resample_axis(h, out_h);
  const ResampleAxis rx = resample_axis(w, out_w);
  std::vector<T> out(static_cast<std::size_t>(out_h) * out_w * c);
  const T* xv = x.data().data();
  for (int i = 0; i < out_h; ++i) {
    const T fy = static_cast<T>(ry.frac[i]);
    for (int j = 0; j < out_w; ++j) {
      const T fx = static_cast<T>(rx.frac[j]);
      const T w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx, w10 = fy * (1 - fx), w11 = fy * fx;
      const T* p00 = xv + (static_cast<std::size_t>(ry.i0[i]) * w + rx.i0[j]) * c;
      const T* p01 = xv + (static_cast<std::size_t>(ry.i0[i]) * w + rx.i1[j]) * c;
      const T* p10 = xv + (static_cast<std::size_t>(ry.i1[i]) * w + rx.i0[j]) * c;
      const T* p11 = xv + (static_cast<std::size_t>(ry.i1[i]) * w + rx.i1[j]) * c;
      T* dst = out.data() + (static_cast<std::size_t>(i) * out_w + j) * c;
      for (int k = 0; k < c; ++k) dst[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
    }
  }
  return make_result<T>({out_h, out_w, c}, std::move(out), {x}, [=](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    for (int i = 0; i < out_h; ++i) {
      const T fy = static_cast<T>(ry.frac[i]);
      for (int j = 0; j < out_w; ++j) {
        const T fx = static_cast<T>(rx.frac[j]);
        const T w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx, w10 = fy * (1 - fx), w11 = fy * fx;
        T* p00 = g + (static_cast<std::size_t>(ry.i0[i]) * w + rx.i0[j]) * c;
        T* p01 = g + (static_cast<std::size_t>(ry.i0[i]) * w + rx.i1[j]) * c;
        T* p10 = g + (static_cast<std::size_t>(ry.i1[i]) * w + rx.i0[j]) * c;
        T* p11 = g + (static_cast<std::size_t>(ry.i1[i]) * w + rx.i1[j]) * c;
        const T* src = o.grad.data() + (static_cast<std::size_t>(i) * out_w + j) * c;
        for (int k = 0; k < c; ++k) {
          p00[k] += w00 * src[k];
          p01[k] += w01 * src[k];
          p10[k] += w10 * src[k];
          p11[k] += w11 * src[k];
        }
      }
    }
  });
}

// -------------------------------------------------------------- normalisation

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  axis = normalize_axis(axis, x.rank(), "softmax");
  const AxisSplit sp = split_at(x.shape(), axis);
  std::vector<T> out(x.numel());
  const T* xv = x.data().data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.extent * sp.inner + in;
      T mx = xv[base];
      for (std::size_t i = 1; i < sp.extent; ++i) mx = std::max(mx, xv[base + i * sp.inner]);
      T s = 0;
      for (std::size_t i = 0; i < sp.extent; ++i) {
        const T e = std::exp(xv[base + i * sp.inner] - mx);
        out[base + i * sp.inner] = e;
        s += e;
      }
      const T inv = T(1) / s;
      for (std::size_t i = 0; i < sp.extent; ++i) out[base + i * sp.inner] *= inv;
    }
  return make_result<T>(x.shape(), std::move(out), {x}, [sp](Node<T>& o) {
    T* g = grad_of(o, 0);
    if (!g) return;
    for (std::size_t ou = 0; ou < sp.outer; ++ou)
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = ou * sp.extent * sp.inner + in;
        T dot = 0;
        for (std::size_t i = 0; i < sp.extent; ++i) {
          const std::size_t idx = base + i * sp.inner;
          dot += o.grad[idx] * o.data[idx];
        }
        for (std::size_t i = 0; i < sp.extent; ++i) {
          const std::size_t idx = base + i * sp.inner;
          g[idx] += o.data[idx] * (o.grad[idx] - dot);
        }
      }
  });
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (!(eps > 0)) throw ConfigError("layernorm: eps must be positive");
  const int c = x.dim(-1);
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c) {
    throw DimensionError("layernorm: affine params " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " incompatible with " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
  std::vector<T> out(x.numel()), xhat(x.numel()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * c;
    T mu = 0;
    for (int k = 0; k < c; ++k) mu += xr[k];
    mu /= c;
    T var = 0;
    for (int k = 0; k < c; ++k) var += (xr[k] - mu) * (xr[k] - mu);
    var /= c;
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int k = 0; k < c; ++k) {
      const T xh = (xr[k] - mu) * is;
      xhat[r * c + k] = xh;
      out[r * c + k] = gamma[k] * xh + beta[k];
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& o) {
        const T* gv = data_of(o, 1);
        T* gx = grad_of(o, 0);
        T* gg = grad_of(o, 1);
        T* gb = grad_of(o, 2);
        std::vector<T> gxh(static_cast<std::size_t>(c));
        for (std::size_t r = 0; r < rows; ++r) {
          const T* go = o.grad.data() + r * c;
          const T* xh = xhat.data() + r * c;
          T m1 = 0, m2 = 0;
          for (int k = 0; k < c; ++k) {
            gxh[k] = go[k] * gv[k];
            m1 += gxh[k];
            m2 += gxh[k] * xh[k];
            if (gg) gg[k] += go[k] * xh[k];
            if (gb) gb[k] += go[k];
          }
          m1 /= c;
          m2 /= c;
          if (gx) {
            for (int k = 0; k < c; ++k) gx[r * c + k] += inv_std[r] * (gxh[k] - m1 - xh[k] * m2);
          }
        }
      });
}

// ---------------------------------------------------------------------- scans

namespace {
// Enumerates the scan lines for a direction: each line is (start, step, length).
struct ScanLines {
  int count = 0, length = 0;
  long line_stride = 0, start_offset = 0, step = 0;
};

ScanLines scan_lines(int h, int w, int c, ScanDirection dir) {
  ScanLines s;
  const long row = static_cast<long>(w) * c;
  switch (dir) {
    case ScanDirection::RowForward:
      s = {h, w, row, 0, c};
      break;
    case ScanDirection::RowBackward:
      s = {h, w, row, static_cast<long>(w - 1) * c, -c};
      break;
    case ScanDirection::ColForward:
      s = {w, h, c, 0, row};
      break;
    case ScanDirection::ColBackward:
      s = {w, h, c, static_cast<long>(h - 1) * row, -row};
      break;
  }
  return s;
}
}  // namespace

template <typename T>
Tensor<T> directional_scan(const Tensor<T>& gate, const Tensor<T>& value, ScanDirection dir) {
  require_rank("directional_scan", gate, 3);
  require_same_shape("directional_scan", gate, value);
  const int h = gate.dim(0), w = gate.dim(1), c = gate.dim(2);
  const ScanLines sl = scan_lines(h, w, c, dir);
  std::vector<T> out(gate.numel());
  const T* av = gate.data().data();
  const T* vv = value.data().data();
  parallel_for(
      sl.count,
      [&](int l0, int l1) {
        for (int line = l0; line < l1; ++line) {
          long idx = line * sl.line_stride + sl.start_offset;
          const T* prev = nullptr;
          for (int t = 0; t < sl.length; ++t, idx += sl.step) {
            for (int k = 0; k < c; ++k) {
              const T a = av[idx + k];
              const T hp = prev ? prev[k] : T(0);
              out[idx + k] = a * hp + (T(1) - a) * vv[idx + k];
            }
            prev = out.data() + idx;
          }
        }
      },
      static_cast<long>(sl.length) * c);
  return make_result<T>(gate.shape(), std::move(out), {gate, value}, [sl, c](Node<T>& o) {
    const T* av = data_of(o, 0);
    const T* vv = data_of(o, 1);
    T* ga = grad_of(o, 0);
    T* gv = grad_of(o, 1);
    std::vector<T> carry(static_cast<std::size_t>(c));
    for (int line = 0; line < sl.count; ++line) {
      std::fill(carry.begin(), carry.end(), T(0));
      const long first = line * sl.line_stride + sl.start_offset;
      for (int t = sl.length - 1; t >= 0; --t) {
        const long idx = first + t * sl.step;
        for (int k = 0; k < c; ++k) {
          const T g = o.grad[idx + k] + carry[k];
          const T a = av[idx + k];
          const T hp = t > 0 ? o.data[idx - sl.step + k] : T(0);
          if (ga) ga[idx + k] += g * (hp - vv[idx + k]);
          if (gv) gv[idx + k] += g * (T(1) - a);
          carry[k] = g * a;
        }
      }
    }
  });
}

// --------------------------------------------------------------------- losses

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                        std::optional<int> ignore_index) {
  const int classes = logits.dim(-1);
  const std::size_t positions = logits.numel() / static_cast<std::size_t>(classes);
  if (labels.size() != positions) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_str(logits.shape()));
  }
  std::vector<T> prob(logits.numel());
  T total = 0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < positions; ++p) {
    const T* z = logits.data().data() + p * classes;
    T mx = z[0];
    for (int k = 1; k < classes; ++k) mx = std::max(mx, z[k]);
    T s = 0;
    for (int k = 0; k < classes; ++k) s += std::exp(z[k] - mx);
    for (int k = 0; k < classes; ++k) prob[p * classes + k] = std::exp(z[k] - mx) / s;
    const int label = labels[p];
    if (ignore_index && label == *ignore_index) continue;
    if (label < 0 || label >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0," +
                              std::to_string(classes) + ")");
    }
    total += -(z[label] - mx - std::log(s));
    ++count;
  }
  if (count == 0) throw std::domain_error("cross_entropy: every position is ignored; mean undefined");
  const T inv = T(1) / static_cast<T>(count);
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result<T>(
      {1}, {total * inv}, {logits},
      [prob = std::move(prob), lab = std::move(lab), classes, inv, ignore_index](Node<T>& o) {
        T* g = grad_of(o, 0);
        if (!g) return;
        const T scale = o.grad[0] * inv;
        for (std::size_t p = 0; p < lab.size(); ++p) {
          if (ignore_index && lab[p] == *ignore_index) continue;
          for (int k = 0; k < classes; ++k) {
            const T target = k == lab[p] ? T(1) : T(0);
            g[p * classes + k] += scale * (prob[p * classes + k] - target);
          }
        }
      });
}

template <typename T>
Tensor<T> symmetric_kl(const Tensor<T>& p, const Tensor<T>& q, T eps) {
  require_same_shape("symmetric_kl", p, q);
  const int c = p.dim(-1);
  const std::size_t positions = p.numel() / static_cast<std::size_t>(c);
  std::vector<T> pn(p.numel()), qn(q.numel());
  std::vector<T> psum(positions), qsum(positions);
  T total = 0;
  for (std::size_t r = 0; r < positions; ++r) {
    T sp = 0, sq = 0;
    for (int k = 0; k < c; ++k) {
      sp += std::max(p[r * c + k], eps);
      sq += std::max(q[r * c + k], eps);
    }
    psum[r] = sp;
    qsum[r] = sq;
    T kl = 0;
    for (int k = 0; k < c; ++k) {
      const T a = std::max(p[r * c + k], eps) / sp;
      const T b = std::max(q[r * c + k], eps) / sq;
      pn[r * c + k] = a;
      qn[r * c + k] = b;
      kl += (a - b) * (std::log(a) - std::log(b));
    }
    total += T(0.5) * kl;
  }
  const T inv = T(1) / static_cast<T>(positions);
  return make_result<T>(
      {1}, {total * inv}, {p, q},
      [=, pn = std::move(pn), qn = std::move(qn), psum = std::move(psum),
       qsum = std::move(qsum)](Node<T>& o) {
        const T* pv = data_of(o, 0);
        const T* qv = data_of(o, 1);
        T* gp = grad_of(o, 0);
        T* gq = grad_of(o, 1);
        const T scale = o.grad[0] * inv * T(0.5);
        std::vector<T> da(static_cast<std::size_t>(c)), db(static_cast<std::size_t>(c));
        for (std::size_t r = 0; r < positions; ++r) {
          T dot_a = 0, dot_b = 0;
          for (int k = 0; k < c; ++k) {
            const T a = pn[r * c + k], b = qn[r * c + k];
            const T lr = std::log(a) - std::log(b);
            da[k] = scale * (lr + T(1) - b / a);
            db[k] = scale * (-lr + T(1) - a / b);
            dot_a += da[k] * a;
            dot_b += db[k] * b;
          }
          for (int k = 0; k < c; ++k) {
            if (gp && pv[r * c + k] > eps) gp[r * c + k] += (da[k] - dot_a) / psum[r];
            if (gq && qv[r * c + k] > eps) gq[r * c + k] += (db[k] - dot_b) / qsum[r];
          }
        }
      });
}

#define F2NET_OPS_INSTANTIATE(T)                                                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
  template Tensor<T> gelu(const Tensor<T>&);                                                    \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> mean(const Tensor<T>&);                                                    \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                          \
  template Tensor<T> slice(const Tensor<T>&, int, int, int);                                    \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                \
  template Tensor<T> transpose(const Tensor<T>&);                                               \
  template Tensor<T> pad_replicate(const Tensor<T>&, int, int, int, int);                       \
  template Tensor<T> crop(const Tensor<T>&, int, int, int, int);                                \
  template Tensor<T> patchify(const Tensor<T>&, int);                                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> outer(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> mul_channels(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, Padding); \
  template Tensor<T> dynamic_depthwise_conv(const Tensor<T>&, const Tensor<T>&, Padding);       \
  template Tensor<T> spatial_avg_pool(const Tensor<T>&);                                        \
  template Tensor<T> bilinear_resize(const Tensor<T>&, int, int);                               \
  template Tensor<T> softmax(const Tensor<T>&, int);                                            \
  template Tensor<T> layernorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> directional_scan(const Tensor<T>&, const Tensor<T>&, ScanDirection);       \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>, std::optional<int>);  \
  template Tensor<T> symmetric_kl(const Tensor<T>&, const Tensor<T>&, T);

F2NET_OPS_INSTANTIATE(float)
F2NET_OPS_INSTANTIATE(double)

}  // namespace f2net
