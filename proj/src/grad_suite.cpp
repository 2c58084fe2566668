// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/grad_suite.hpp"

#include <functional>
#include <random>
#include <stdexcept>

#include "f2net/grad_check.hpp"
#include "f2net/model.hpp"

namespace f2net {

namespace {

using D = double;
using TensorD = Tensor<D>;

class Suite {
 public:
  Suite(std::uint64_t seed, std::vector<GradCheckEntry>& out) : rng_(seed), out_(out) {}

  TensorD randn(Shape s, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    std::vector<D> v(shape_numel(s));
    for (auto& x : v) x = n(rng_);
    return TensorD::from(std::move(s), std::move(v));
  }

  /// Scalar probe sum(y * w) with w fixed, so every output element matters.
  TensorD probe(const TensorD& y) {
    auto it = weights_.find(y.numel());
    if (it == weights_.end()) it = weights_.emplace(y.numel(), randn({static_cast<int>(y.numel())})).first;
    return sum(mul(reshape(y, {static_cast<int>(y.numel())}), it->second));
  }

  void check(const std::string& module, const std::string& name, const std::function<TensorD()>& f,
             const std::vector<TensorD>& inputs, std::size_t max_per_tensor = 0) {
    out_.push_back({module, name, grad_check(f, inputs, 1e-5, max_per_tensor, rng_(), Stencil::Central)});
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::vector<GradCheckEntry>& out_;
  std::map<std::size_t, TensorD> weights_;
};

void tensor_core_checks(Suite& s) {
  const std::string m = "tensor_core";
  auto a = s.randn({3, 4}), b = s.randn({3, 4});
  s.check(m, "add_sub_mul", [&] { return s.probe(mul(add(a, b), sub(a, b))); }, {a, b});
  s.check(m, "scale_add_scalar", [&] { return s.probe(add_scalar(scale(a, 1.7), 0.3)); }, {a});
  s.check(m, "sigmoid", [&] { return s.probe(sigmoid(a)); }, {a});
  s.check(m, "gelu", [&] { return s.probe(gelu(a)); }, {a});
  s.check(m, "mean", [&] { return mean(mul(a, a)); }, {a});
  s.check(m, "slice_concat_transpose",
          [&] { return s.probe(concat<D>({transpose(slice(a, 1, 1, 3)), slice(transpose(b), 0, 0, 2)}, 0)); }, {a, b});

  auto x = s.randn({6, 5, 3});
  s.check(m, "pad_replicate", [&] { return s.probe(pad_replicate(x, 1, 2, 2, 1)); }, {x});
  s.check(m, "crop", [&] { return s.probe(crop(x, 1, 1, 4, 3)); }, {x});
  auto xp = s.randn({4, 6, 2});
  s.check(m, "patchify", [&] { return s.probe(patchify(xp, 2)); }, {xp});

  auto mA = s.randn({3, 5}), mB = s.randn({5, 2});
  s.check(m, "matmul", [&] { return s.probe(matmul(mA, mB)); }, {mA, mB});
  auto u = s.randn({3}), v = s.randn({4});
  s.check(m, "outer", [&] { return s.probe(outer(u, v)); }, {u, v});
  auto w = s.randn({3, 4}), bias = s.randn({4});
  s.check(m, "linear", [&] { return s.probe(linear(x, w, bias)); }, {x, w, bias});
  auto cv = s.randn({3});
  s.check(m, "mul_channels", [&] { return s.probe(mul_channels(x, cv)); }, {x, cv});

  auto k3 = s.randn({3, 3, 3, 2}, 0.5), cb = s.randn({2});
  s.check(m, "conv2d_replicate", [&] { return s.probe(conv2d(x, k3, cb)); }, {x, k3, cb});
  s.check(m, "conv2d_stride2_zero", [&] { return s.probe(conv2d(x, k3, cb, 2, Padding::Zero)); }, {x, k3, cb});
  auto dk = s.randn({6, 5, 9}, 0.5);
  s.check(m, "dynamic_depthwise_conv", [&] { return s.probe(dynamic_depthwise_conv(x, dk)); }, {x, dk});
  s.check(m, "dynamic_depthwise_conv_zero",
          [&] { return s.probe(dynamic_depthwise_conv(x, dk, Padding::Zero)); }, {x, dk});
  s.check(m, "spatial_avg_pool", [&] { return s.probe(spatial_avg_pool(x)); }, {x});
  s.check(m, "bilinear_up", [&] { return s.probe(bilinear_resize(x, 9, 11)); }, {x});
  s.check(m, "bilinear_down", [&] { return s.probe(bilinear_resize(x, 3, 2)); }, {x});

  s.check(m, "softmax_last", [&] { return s.probe(softmax(x, -1)); }, {x});
  s.check(m, "softmax_first", [&] { return s.probe(softmax(x, 0)); }, {x});
  auto g = s.randn({3}), be = s.randn({3});
  s.check(m, "layernorm", [&] { return s.probe(layernorm(x, g, be, 1e-5)); }, {x, g, be});

  auto gate = s.randn({5, 4, 3}), val = s.randn({5, 4, 3});
  for (ScanDirection d : {ScanDirection::RowForward, ScanDirection::RowBackward, ScanDirection::ColForward,
                          ScanDirection::ColBackward}) {
    s.check(m, "directional_scan_" + std::to_string(static_cast<int>(d)),
            [&] { return s.probe(directional_scan(sigmoid(gate), val, d)); }, {gate, val});
  }

  auto logits = s.randn({4, 3, 5});
  std::vector<int> labels{0, 1, 2, 3, 4, 255, 1, 2, 0, 4, 3, 255};
  s.check(m, "cross_entropy", [&] { return cross_entropy(logits, std::span<const int>(labels), std::optional<int>(255)); },
          {logits});
  auto p = s.randn({4, 3, 5}), q = s.randn({4, 3, 5});
  s.check(m, "symmetric_kl", [&] { return symmetric_kl(softmax(p, -1), softmax(q, -1)); }, {p, q});
}

std::vector<TensorD> trainable(ParamStore<D>& store) {
  std::vector<TensorD> v;
  for (auto& p : store.params()) {
    if (p.trainable) v.push_back(p.value);
  }
  return v;
}

/// Raises every zero-initialised parameter to small random values so the
/// check exercises paths that start switched off.
void perturb(ParamStore<D>& store, Suite& s) {
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& p : store.params()) {
    for (auto& x : p.value.mutable_data()) {
      if (x == 0.0) x = n(s.rng());
    }
  }
}

std::vector<TensorD> with(std::vector<TensorD> v, const TensorD& extra) {
  v.push_back(extra);
  return v;
}

void afd_checks(Suite& s) {
  ParamStore<D> store;
  Initializer<D> init(s.rng()());
  AfdConfig cfg;
  cfg.embed_dim = 4;
  cfg.groups = 2;
  FrequencyDecomposer<D> afd(cfg, 3, store, init);
  perturb(store, s);
  auto img = s.randn({6, 6, 3});
  s.check("afd", "stem_decompose", [&] {
    auto fp = afd.decompose(afd.stem(img));
    return add(s.probe(fp.lf), s.probe(scale(fp.hf, 0.5)));
  }, with(trainable(store), img));
  auto lf = s.randn({8, 8, 2});
  s.check("afd", "downsample_lf", [&] { return s.probe(downsample_lf(lf, 4)); }, {lf});
}

void hf_checks(Suite& s) {
  ParamStore<D> store;
  Initializer<D> init(s.rng()());
  HfBranchConfig cfg;
  cfg.num_stages = 2;
  cfg.stage_depths = {1, 1};
  cfg.base_channels = 3;
  cfg.ffn_expansion = 2;
  HighFrequencyBranch<D> hf(cfg, 2, store, init);
  perturb(store, s);
  auto x = s.randn({8, 8, 2});
  s.check("hf_branch", "forward_hf", [&] { return s.probe(hf.forward(x)); }, with(trainable(store), x));
  auto z = s.randn({4, 3, 3});
  s.check("hf_branch", "vss_block", [&] { return s.probe(vss_block(z, hf.stages[0][0])); }, {z});
}

void lf_checks(Suite& s) {
  auto q = s.randn({5, 4}), k = s.randn({5, 4}), v = s.randn({5, 4});
  s.check("lf_branch", "attention", [&] { return s.probe(attention(q, k, v)); }, {q, k, v});

  ParamStore<D> store;
  Initializer<D> init(s.rng()());
  LfBranchConfig cfg;
  cfg.short_blocks = 1;
  cfg.short_channels = 3;
  cfg.long_layers = 1;
  cfg.long_heads = 2;
  cfg.long_dim = 4;
  cfg.patch_size = 2;
  ShortRangeBranch<D> sr(cfg, 2, store, init);
  LongRangeBranch<D> lr(cfg, 2, 2, store, init);
  perturb(store, s);
  auto x = s.randn({4, 4, 2});
  s.check("lf_branch", "forward_short_long",
          [&] { return add(s.probe(sr.forward(x)), s.probe(lr.forward(x))); }, with(trainable(store), x));
  auto x6 = s.randn({6, 6, 2});
  s.check("lf_branch", "forward_long_resampled_position", [&] { return s.probe(lr.forward(x6)); },
          with(trainable(store), x6));
}

void hff_checks(Suite& s) {
  ParamStore<D> store;
  Initializer<D> init(s.rng()());
  HybridFrequencyFusion<D> hff(3, 2, 2, store, init, "fusion");
  perturb(store, s);
  auto a = s.randn({3, 4, 3}), b = s.randn({3, 4, 2});
  s.check("hff_fusion", "fuse", [&] { return s.probe(hff.fuse(a, b)); }, with(with(trainable(store), a), b));
}

void objective_checks(Suite& s) {
  auto fa = s.randn({4, 4, 3}), fb = s.randn({2, 2, 5});
  auto pa = s.randn({1, 1, 3, 3}), pb = s.randn({1, 1, 5, 3});
  s.check("objectives", "cfal", [&] {
    return cfal(feature_to_distribution(fa, pa, 4, 4), feature_to_distribution(fb, pb, 4, 4));
  }, {fa, fb, pa, pb});
  auto logits = s.randn({3, 3, 4});
  std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3, 0};
  s.check("objectives", "ce_loss", [&] { return ce_loss(logits, std::span<const int>(labels)); }, {logits});
}

void model_checks(Suite& s, const F2NetConfig& cfg, std::size_t samples) {
  F2Net<D> model(cfg);
  perturb(model.params(), s);
  // The head starts near zero, which would shrink every upstream gradient
  // towards the finite-difference noise floor.
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& x : model.head_weight.mutable_data()) x = n(s.rng());
  auto img = s.randn({16, 16, cfg.in_channels}, 0.5);
  std::vector<int> labels(16 * 16);
  std::uniform_int_distribution<int> cls(0, cfg.num_classes - 1);
  for (auto& l : labels) l = cls(s.rng());
  s.check("f2net_model", "end_to_end_16x16", [&] {
    auto out = model.forward(img);
    auto loss = scale(ce_loss(out.logits, std::span<const int>(labels)), cfg.loss.lambda3);
    return add(loss, scale(model.alignment_loss(out), cfg.loss.lambda1));
  }, with(trainable(model.params()), img), samples);
}

}  // namespace

const std::vector<std::string>& grad_suite_modules() {
  static const std::vector<std::string> names{"tensor_core", "afd",        "hf_branch",  "lf_branch",
                                              "hff_fusion",  "objectives", "f2net_model"};
  return names;
}

std::vector<GradCheckEntry> run_grad_suite(const F2NetConfig& cfg, std::uint64_t seed, const std::string& module,
                                           std::size_t model_samples) {
  const auto& names = grad_suite_modules();
  if (!module.empty() && std::find(names.begin(), names.end(), module) == names.end()) {
    throw std::invalid_argument("unknown gradcheck module '" + module + "'");
  }
  std::vector<GradCheckEntry> out;
  Suite s(seed, out);
  auto want = [&](const char* name) { return module.empty() || module == name; };
  if (want("tensor_core")) tensor_core_checks(s);
  if (want("afd")) afd_checks(s);
  if (want("hf_branch")) hf_checks(s);
  if (want("lf_branch")) lf_checks(s);
  if (want("hff_fusion")) hff_checks(s);
  if (want("objectives")) objective_checks(s);
  if (want("f2net_model")) model_checks(s, cfg, model_samples);
  return out;
}

}  // namespace f2net
