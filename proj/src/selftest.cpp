// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/selftest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "f2net/checkpoint.hpp"
#include "f2net/data_io.hpp"
#include "f2net/metrics.hpp"
#include "f2net/model.hpp"

namespace f2net {

namespace fs = std::filesystem;

namespace {

using TD = Tensor<double>;

struct CaseFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw CaseFailure(what);
}

void expect_near(double a, double b, double tol, const std::string& what) {
  if (!(std::abs(a - b) <= tol)) {
    std::ostringstream os;
    os << what << ": " << a << " vs " << b << " (tol " << tol << ")";
    throw CaseFailure(os.str());
  }
}

template <typename T>
void expect_all_near(const Tensor<T>& t, double v, double tol, const std::string& what) {
  for (T x : t.data()) expect_near(x, v, tol, what);
}

template <typename T>
void expect_tensors_near(const Tensor<T>& a, const Tensor<T>& b, double tol, const std::string& what) {
  expect(a.shape() == b.shape(), what + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  for (std::size_t i = 0; i < a.numel(); ++i) expect_near(a[i], b[i], tol, what);
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

TD randn(std::mt19937_64& rng, Shape s, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> v(shape_numel(s));
  for (auto& x : v) x = n(rng);
  return TD::from(std::move(s), std::move(v));
}

Tensor<float> randu_image(std::mt19937_64& rng, int h, int w, int c = 3) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(h) * w * c);
  for (auto& x : v) x = u(rng);
  return Tensor<float>::from({h, w, c}, std::move(v));
}

template <typename T>
void fill(Tensor<T>& t, T v) {
  for (auto& x : t.mutable_data()) x = v;
}

// Scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = fs::temp_directory_path() / ("f2net_selftest_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

F2NetConfig small_model_config(int classes) {
  F2NetConfig c = toy_config();
  c.num_classes = classes;
  c.reference_size = 32;
  return c;
}

class Runner {
 public:
  explicit Runner(std::ostream* log) : log_(log) {}

  void run(const std::string& name, const std::function<void()>& body) {
    try {
      body();
      ++report_.passed;
      if (log_) *log_ << "ok    " << name << '\n';
    } catch (const std::exception& e) {
      report_.failures.push_back(name + ": " + e.what());
      if (log_) *log_ << "FAIL  " << name << ": " << e.what() << '\n';
    }
  }

  SelftestReport report() const { return report_; }

 private:
  std::ostream* log_;
  SelftestReport report_;
};

void tensor_core_cases(Runner& r) {
  r.run("conv2d: 1x1 identity weight leaves input unchanged", [] {
    std::mt19937_64 rng(1);
    TD x = randn(rng, {5, 4, 3});
    TD w = TD::zeros({1, 1, 3, 3});
    for (int c = 0; c < 3; ++c) w.mutable_data()[c * 3 + c] = 1.0;
    expect(bit_equal(conv2d(x, w), x), "output differs from input");
  });
  r.run("conv2d: 3x3 ones on constant c gives 9c", [] {
    TD x = TD::full({6, 6, 1}, 0.7);
    expect_all_near(conv2d(x, TD::full({3, 3, 1, 1}, 1.0)), 6.3, 1e-12, "box sum");
  });
  r.run("dynamic_depthwise_conv: identity kernels reproduce input", [] {
    std::mt19937_64 rng(2);
    TD x = randn(rng, {6, 5, 2});
    TD k = TD::zeros({6, 5, 9});
    for (int p = 0; p < 30; ++p) k.mutable_data()[p * 9 + 4] = 1.0;
    expect(bit_equal(dynamic_depthwise_conv(x, k), x), "output differs from input");
  });
  r.run("dynamic_depthwise_conv: uniform kernels on constant stay constant", [] {
    expect_all_near(dynamic_depthwise_conv(TD::full({5, 5, 2}, 3.0), TD::full({5, 5, 9}, 1.0 / 9)), 3.0, 1e-12,
                    "constant");
  });
  r.run("softmax: equal logits are uniform", [] {
    expect_all_near(softmax(TD::zeros({3}), 0), 1.0 / 3, 1e-15, "uniform");
  });
  r.run("softmax: shift invariance at large magnitude", [] {
    TD a = softmax(TD::from({2}, {1000.0, 1001.0}), 0), b = softmax(TD::from({2}, {0.0, 1.0}), 0);
    expect_tensors_near(a, b, 1e-15, "shifted");
  });
  r.run("layernorm: constant vector maps to zeros", [] {
    expect_all_near(layernorm(TD::full({2, 4}, 5.0), TD::full({4}, 1.0), TD::zeros({4}), 1e-5), 0.0, 1e-12, "zero");
  });
  r.run("layernorm: gamma 0 collapses to beta", [] {
    std::mt19937_64 rng(3);
    expect_all_near(layernorm(randn(rng, {3, 4}), TD::zeros({4}), TD::full({4}, 0.25), 1e-5), 0.25, 1e-15, "beta");
  });
  r.run("sigmoid(0) is 0.5", [] { expect_near(sigmoid(TD::zeros({1})).item(), 0.5, 0, "sigmoid"); });
  r.run("spatial_avg_pool of constant map", [] {
    expect_all_near(spatial_avg_pool(TD::full({4, 3, 2}, -1.5)), -1.5, 1e-15, "pool");
  });
  r.run("backward: d sum(x) = ones", [] {
    TD x = TD::from({3}, {1.0, -2.0, 4.0});
    x.set_requires_grad();
    backward(sum(x));
    for (double g : x.grad()) expect_near(g, 1.0, 0, "grad");
  });
  r.run("backward: d sum(x*x) at [1,2] = [2,4]", [] {
    TD x = TD::from({2}, {1.0, 2.0});
    x.set_requires_grad();
    backward(sum(mul(x, x)));
    expect_near(x.grad()[0], 2.0, 0, "grad0");
    expect_near(x.grad()[1], 4.0, 0, "grad1");
  });
}

void afd_cases(Runner& r) {
  auto make = [](int in, int d, int groups, std::uint64_t seed, ParamStore<double>& store) {
    AfdConfig cfg;
    cfg.embed_dim = d;
    cfg.groups = groups;
    Initializer<double> init(seed);
    return FrequencyDecomposer<double>(cfg, in, store, init);
  };
  r.run("stem: identity 1x1 with C = D reproduces input", [&] {
    ParamStore<double> store;
    auto afd = make(4, 4, 2, 1, store);
    fill(afd.stem_weight, 0.0);
    for (int c = 0; c < 4; ++c) afd.stem_weight.mutable_data()[c * 4 + c] = 1.0;
    std::mt19937_64 rng(4);
    TD x = randn(rng, {5, 5, 4});
    expect(bit_equal(afd.stem(x), x), "stem is not identity");
  });
  r.run("stem: zero weights give zero map", [&] {
    ParamStore<double> store;
    auto afd = make(3, 4, 2, 1, store);
    fill(afd.stem_weight, 0.0);
    std::mt19937_64 rng(5);
    expect_all_near(afd.stem(randn(rng, {4, 4, 3})), 0.0, 0, "zero");
  });
  r.run("build_lowpass_kernels: zero generator gives uniform 1/k^2", [&] {
    ParamStore<double> store;
    auto afd = make(3, 4, 2, 1, store);
    fill(afd.generator_weight[0], 0.0);
    std::mt19937_64 rng(6);
    expect_all_near(afd.build_lowpass_kernels(randn(rng, {4, 4, 2}), 0), 1.0 / 9, 1e-15, "uniform");
  });
  r.run("build_lowpass_kernels: per-pixel sums are 1", [&] {
    ParamStore<double> store;
    auto afd = make(3, 4, 2, 7, store);
    std::mt19937_64 rng(7);
    TD k = afd.build_lowpass_kernels(randn(rng, {5, 4, 2}, 3.0), 1);
    for (int p = 0; p < 20; ++p) {
      double s = 0;
      for (int t = 0; t < 9; ++t) s += k[p * 9 + t];
      expect_near(s, 1.0, 1e-6, "kernel sum");
    }
  });
  r.run("derive_highpass_kernels: uniform low-pass gives 8/9 centre, -1/9 elsewhere", [] {
    TD hp = derive_highpass_kernels(TD::full({2, 2, 9}, 1.0 / 9));
    for (int p = 0; p < 4; ++p) {
      for (int t = 0; t < 9; ++t) expect_near(hp[p * 9 + t], t == 4 ? 8.0 / 9 : -1.0 / 9, 1e-15, "tap");
    }
  });
  r.run("derive_highpass_kernels: delta low-pass gives zero", [] {
    TD lp = TD::zeros({2, 3, 9});
    for (int p = 0; p < 6; ++p) lp.mutable_data()[p * 9 + 4] = 1.0;
    expect_all_near(derive_highpass_kernels(lp), 0.0, 0, "zero");
  });
  r.run("derive_highpass_kernels: taps sum to 0", [] {
    std::mt19937_64 rng(8);
    TD hp = derive_highpass_kernels(softmax(randn(rng, {3, 3, 9}), -1));
    for (int p = 0; p < 9; ++p) {
      double s = 0;
      for (int t = 0; t < 9; ++t) s += hp[p * 9 + t];
      expect_near(s, 0.0, 1e-6, "sum");
    }
  });
  r.run("decompose: constant map gives lf = c, hf = 0", [&] {
    ParamStore<double> store;
    auto afd = make(3, 4, 2, 9, store);
    auto fp = afd.decompose(TD::full({6, 6, 4}, 2.5));
    expect_all_near(fp.lf, 2.5, 1e-12, "lf");
    expect_all_near(fp.hf, 0.0, 1e-12, "hf");
  });
  r.run("decompose: impulse with uniform kernels gives 1/9 and 8/9", [&] {
    ParamStore<double> store;
    auto afd = make(3, 2, 1, 10, store);
    fill(afd.generator_weight[0], 0.0);
    TD x = TD::zeros({5, 5, 2});
    x.mutable_data()[(2 * 5 + 2) * 2] = 1.0;
    auto fp = afd.decompose(x);
    expect_near(fp.lf[(2 * 5 + 2) * 2], 1.0 / 9, 1e-15, "lf");
    expect_near(fp.hf[(2 * 5 + 2) * 2], 8.0 / 9, 1e-15, "hf");
  });
  r.run("downsample_lf: factor 1 is identity", [] {
    std::mt19937_64 rng(11);
    TD x = randn(rng, {4, 4, 2});
    expect(bit_equal(downsample_lf(x, 1), x), "not identity");
  });
  r.run("downsample_lf: constant stays constant", [] {
    TD y = downsample_lf(TD::full({8, 8, 3}, -0.5), 4);
    expect(y.shape() == Shape({2, 2, 3}), "shape");
    expect_all_near(y, -0.5, 1e-15, "constant");
  });
}

HfBranchConfig small_hf(int stages, int base) {
  HfBranchConfig c;
  c.num_stages = stages;
  c.stage_depths.assign(stages, 1);
  c.base_channels = base;
  c.ffn_expansion = 2;
  return c;
}

void zero_block_outputs(VssBlockParams<double>& b) {
  fill(b.out_weight, 0.0);
  fill(b.out_bias, 0.0);
  fill(b.ffn_weight2, 0.0);
  fill(b.ffn_bias2, 0.0);
}

void hf_cases(Runner& r) {
  r.run("embed: zero input gives the bias pattern", [] {
    ParamStore<double> store;
    Initializer<double> init(1);
    HighFrequencyBranch<double> hf(small_hf(1, 3), 2, store, init);
    fill(hf.embed_bias, 0.0);
    hf.embed_bias.mutable_data()[1] = 0.75;
    TD y = hf.embed(TD::zeros({8, 8, 2}));
    expect(y.shape() == Shape({4, 4, 3}), "shape");
    for (int p = 0; p < 16; ++p) {
      for (int c = 0; c < 3; ++c) expect_near(y[p * 3 + c], c == 1 ? 0.75 : 0.0, 0, "bias");
    }
  });
  auto scan_block = [](double gate_bias, std::vector<ScanDirection> dirs, ParamStore<double>& store) {
    HfBranchConfig cfg = small_hf(1, 3);
    cfg.ssm_state_mixing = gate_bias;
    Initializer<double> init(3);
    return make_vss_block(store, "probe", 3, cfg, init, dirs);
  };
  r.run("ss2d_scan: gate near 0 is memoryless", [&] {
    ParamStore<double> store;
    auto p = scan_block(-40.0, kAllScanDirections, store);
    std::mt19937_64 rng(12);
    TD x = randn(rng, {4, 5, 3});
    TD base = ss2d_scan(x, p);
    TD x2 = x.detach();
    x2.mutable_data()[(1 * 5 + 2) * 3 + 1] += 1.0;
    TD moved = ss2d_scan(x2, p);
    for (int pix = 0; pix < 20; ++pix) {
      if (pix == 1 * 5 + 2) continue;
      for (int c = 0; c < 3; ++c) expect_near(moved[pix * 3 + c], base[pix * 3 + c], 1e-12, "leak");
    }
  });
  r.run("ss2d_scan: gate near 1 on forward rows forgets later pixels", [&] {
    ParamStore<double> store;
    auto p = scan_block(40.0, {ScanDirection::RowForward}, store);
    std::mt19937_64 rng(13);
    TD x = randn(rng, {3, 6, 3});
    TD base = ss2d_scan(x, p);
    TD zero_state = linear(TD::zeros({1, 3}), p.out_weight, p.out_bias);
    for (int pix = 0; pix < 18; ++pix) {
      for (int c = 0; c < 3; ++c) expect_near(base[pix * 3 + c], zero_state[c], 1e-12, "state");
    }
    TD x2 = x.detach();
    x2.mutable_data()[(1 * 6 + 4) * 3] += 5.0;
    TD moved = ss2d_scan(x2, p);
    for (std::size_t i = 0; i < base.numel(); ++i) expect_near(moved[i], base[i], 1e-12, "influence");
  });
  r.run("vss_block: zeroed output projections give identity", [] {
    ParamStore<double> store;
    Initializer<double> init(4);
    auto p = make_vss_block(store, "b", 4, small_hf(1, 4), init);
    zero_block_outputs(p);
    std::mt19937_64 rng(14);
    TD z = randn(rng, {3, 3, 4});
    expect(bit_equal(vss_block(z, p), z), "not identity");
  });
  r.run("vss_block: zero input with zero biases gives zero", [] {
    ParamStore<double> store;
    Initializer<double> init(5);
    auto p = make_vss_block(store, "b", 4, small_hf(1, 4), init);
    expect_all_near(vss_block(TD::zeros({3, 3, 4}), p), 0.0, 0, "zero");
  });
  r.run("forward_hf: depths [1,1], C0 4, 32x32 gives 8x8x8", [] {
    ParamStore<double> store;
    Initializer<double> init(6);
    HighFrequencyBranch<double> hf(small_hf(2, 4), 2, store, init);
    std::mt19937_64 rng(15);
    expect(hf.forward(randn(rng, {32, 32, 2})).shape() == Shape({8, 8, 8}), "shape");
  });
  r.run("forward_hf: identity blocks reduce to embed and downsample", [] {
    ParamStore<double> store;
    Initializer<double> init(7);
    HighFrequencyBranch<double> hf(small_hf(2, 4), 2, store, init);
    for (auto& stage : hf.stages) {
      for (auto& b : stage) zero_block_outputs(b);
    }
    std::mt19937_64 rng(16);
    TD x = randn(rng, {16, 16, 2});
    TD chain = conv2d(hf.embed(x), hf.down_weight[0], hf.down_bias[0], 2, Padding::Replicate);
    expect(bit_equal(hf.forward(x), chain), "not the plain chain");
  });
}

LfBranchConfig small_lf() {
  LfBranchConfig c;
  c.short_blocks = 2;
  c.short_channels = 4;
  c.long_layers = 1;
  c.long_heads = 2;
  c.long_dim = 4;
  c.patch_size = 2;
  return c;
}

void lf_cases(Runner& r) {
  r.run("forward_short: zero final convs reduce to the stem", [] {
    ParamStore<double> store;
    Initializer<double> init(1);
    ShortRangeBranch<double> sr(small_lf(), 3, store, init);
    for (auto& b : sr.blocks) {
      fill(b.conv2_weight, 0.0);
      fill(b.conv2_bias, 0.0);
    }
    std::mt19937_64 rng(17);
    TD x = randn(rng, {8, 8, 3});
    expect(bit_equal(sr.forward(x), sr.downsample(x)), "differs from stem");
  });
  r.run("forward_short: constant input gives constant output", [] {
    ParamStore<double> store;
    Initializer<double> init(2);
    ShortRangeBranch<double> sr(small_lf(), 3, store, init);
    TD y = sr.forward(TD::full({8, 8, 3}, 0.3));
    for (int p = 1; p < 16; ++p) {
      for (int c = 0; c < 4; ++c) expect_near(y[p * 4 + c], y[c], 1e-12, "constant");
    }
  });
  r.run("forward_long: one patch gives a 1x1 descriptor", [] {
    LfBranchConfig cfg = small_lf();
    cfg.patch_size = 4;
    ParamStore<double> store;
    Initializer<double> init(3);
    LongRangeBranch<double> lr(cfg, 3, 1, store, init);
    std::mt19937_64 rng(18);
    expect(lr.forward(randn(rng, {4, 4, 3})).shape() == Shape({1, 1, 4}), "shape");
  });
  r.run("forward_long: zeroed query/key weights average the values", [] {
    ParamStore<double> store;
    Initializer<double> init(4);
    LongRangeBranch<double> lr(small_lf(), 3, 2, store, init);
    auto& a = lr.layers[0];
    for (TD* t : {&a.q_weight, &a.q_bias, &a.k_weight}) fill(*t, 0.0);
    std::mt19937_64 rng(19);
    TD tokens = randn(rng, {5, 4});
    TD out = lr.self_attention(tokens, a);
    TD v = linear(tokens, a.v_weight, a.v_bias);
    std::vector<double> vmean(4, 0.0);
    for (int t = 0; t < 5; ++t) {
      for (int c = 0; c < 4; ++c) vmean[c] += v[t * 4 + c] / 5;
    }
    TD expected = linear(TD::from({1, 4}, vmean), a.proj_weight, a.proj_bias);
    for (int t = 0; t < 5; ++t) {
      for (int c = 0; c < 4; ++c) expect_near(out[t * 4 + c], expected[c], 1e-12, "mean of values");
    }
  });
  r.run("attention: identical keys average the values", [] {
    std::mt19937_64 rng(20);
    TD q = randn(rng, {4, 3}), v = randn(rng, {4, 3});
    TD krow = randn(rng, {1, 3});
    TD k = concat<double>({krow, krow, krow, krow}, 0);
    TD out = attention(q, k, v);
    for (int c = 0; c < 3; ++c) {
      const double m = (v[c] + v[3 + c] + v[6 + c] + v[9 + c]) / 4;
      for (int t = 0; t < 4; ++t) expect_near(out[t * 3 + c], m, 1e-12, "mean");
    }
  });
  r.run("attention: a dominant key selects its value row", [] {
    TD q = TD::full({3, 2}, 1.0);
    TD k = TD::from({3, 2}, {0.0, 0.0, 40.0, 40.0, 0.0, 0.0});
    std::mt19937_64 rng(21);
    TD v = randn(rng, {3, 2});
    TD out = attention(q, k, v);
    for (int t = 0; t < 3; ++t) {
      for (int c = 0; c < 2; ++c) expect_near(out[t * 2 + c], v[2 + c], 1e-9, "argmax row");
    }
  });
}

void hff_cases(Runner& r) {
  auto zero_mlp = [](Mlp<double>& m) {
    for (TD* t : {&m.weight1, &m.bias1, &m.weight2, &m.bias2}) fill(*t, 0.0);
  };
  r.run("channel_attention: zero MLP gives 0.5", [&] {
    ParamStore<double> store;
    Initializer<double> init(1);
    HybridFrequencyFusion<double> h(4, 3, 2, store, init, "f");
    zero_mlp(h.attention_a);
    std::mt19937_64 rng(22);
    expect_all_near(channel_attention(randn(rng, {3, 3, 4}), h.attention_a), 0.5, 0, "half");
  });
  r.run("channel_attention: invariant to spatial shuffles", [] {
    ParamStore<double> store;
    Initializer<double> init(2);
    HybridFrequencyFusion<double> h(3, 3, 1, store, init, "f");
    std::mt19937_64 rng(23);
    TD f = randn(rng, {4, 4, 3});
    std::vector<int> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled(48);
    for (int p = 0; p < 16; ++p) {
      for (int c = 0; c < 3; ++c) shuffled[p * 3 + c] = f[perm[p] * 3 + c];
    }
    expect_tensors_near(channel_attention(f, h.attention_a),
                        channel_attention(TD::from({4, 4, 3}, shuffled), h.attention_a), 1e-14, "attention");
  });
  r.run("cross_branch_matrix: zero A_s gives 0.5", [] {
    std::mt19937_64 rng(24);
    expect_all_near(cross_branch_matrix(TD::zeros({3}), randn(rng, {4})), 0.5, 0, "half");
  });
  r.run("cross_branch_matrix: logit(M) has rank 1", [] {
    std::mt19937_64 rng(25);
    TD a = sigmoid(randn(rng, {3})), b = sigmoid(randn(rng, {4}));
    TD m = cross_branch_matrix(a, b);
    auto logit = [&](int i, int j) {
      const double p = m[i * 4 + j];
      return std::log(p / (1 - p));
    };
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) {
        expect_near(logit(i, j) * logit(0, 0), logit(i, 0) * logit(0, j), 1e-9, "2x2 minor");
      }
    }
  });
  r.run("refine_attentions: zero MLPs give sigmoid(A)", [&] {
    ParamStore<double> store;
    Initializer<double> init(3);
    HybridFrequencyFusion<double> h(3, 2, 1, store, init, "f");
    zero_mlp(h.refine_a);
    zero_mlp(h.refine_b);
    std::mt19937_64 rng(26);
    TD a = randn(rng, {3}), b = randn(rng, {2});
    auto [ra, rb] = refine_attentions(cross_branch_matrix(a, b), a, b, h.refine_a, h.refine_b);
    expect_tensors_near(ra, sigmoid(a), 0, "a");
    expect_tensors_near(rb, sigmoid(b), 0, "b");
  });
  r.run("refine_attentions: large A saturates to 1 monotonically", [] {
    ParamStore<double> store;
    Initializer<double> init(4);
    HybridFrequencyFusion<double> h(2, 2, 1, store, init, "f");
    double prev = 0;
    for (double s : {1.0, 4.0, 16.0, 64.0}) {
      TD a = TD::full({2}, s), b = TD::full({2}, s);
      auto [ra, rb] = refine_attentions(cross_branch_matrix(a, b), a, b, h.refine_a, h.refine_b);
      expect(ra[0] >= prev, "not monotone");
      prev = ra[0];
    }
    expect_near(prev, 1.0, 1e-12, "saturation");
  });
  for (const char* which : {"fuse", "fuse_final"}) {
    r.run(std::string(which) + ": zero F_b and bias leave Conv(A_a F_a)", [&] {
      ParamStore<double> store;
      Initializer<double> init(which[4] ? 5 : 6);
      HybridFrequencyFusion<double> h(3, 2, 1, store, init, which);
      fill(h.align_b_bias, 0.0);
      std::mt19937_64 rng(27);
      TD fa = randn(rng, {3, 3, 3}), fb = TD::zeros({3, 3, 2});
      auto t = h.trace(fa, fb);
      expect_tensors_near(t.output, conv2d(mul_channels(fa, t.refined_a), h.align_a_weight, h.align_a_bias), 1e-15,
                          "branch a only");
    });
    r.run(std::string(which) + ": saturated attention and identity alignment is addition", [&] {
      ParamStore<double> store;
      Initializer<double> init(7);
      HybridFrequencyFusion<double> h(3, 3, 1, store, init, which);
      fill(h.refine_a.bias2, 60.0);
      fill(h.refine_b.bias2, 60.0);
      for (TD* w : {&h.align_a_weight, &h.align_b_weight}) {
        fill(*w, 0.0);
        for (int c = 0; c < 3; ++c) w->mutable_data()[c * 3 + c] = 1.0;
      }
      fill(h.align_a_bias, 0.0);
      fill(h.align_b_bias, 0.0);
      std::mt19937_64 rng(28);
      TD fa = randn(rng, {4, 3, 3}), fb = randn(rng, {4, 3, 3});
      expect_tensors_near(h.fuse(fa, fb), add(fa, fb), 1e-5, "add");
    });
  }
}

void objective_cases(Runner& r) {
  r.run("ce_loss: confident correct logits give ~0", [] {
    std::vector<int> labels{0, 2, 1, 2};
    std::vector<double> l(12, -50.0);
    for (int p = 0; p < 4; ++p) l[p * 3 + labels[p]] = 50.0;
    expect_near(ce_loss(TD::from({2, 2, 3}, l), labels).item(), 0.0, 1e-12, "ce");
  });
  r.run("ce_loss: uniform logits give ln L", [] {
    std::vector<int> labels{0, 1, 3, 4, 2, 1};
    expect_near(ce_loss(TD::zeros({2, 3, 5}), labels).item(), std::log(5.0), 1e-12, "ce");
  });
  r.run("feature_to_distribution: equal channels give uniform", [] {
    TD proj = TD::zeros({1, 1, 3, 3});
    for (int c = 0; c < 3; ++c) proj.mutable_data()[c * 3 + c] = 1.0;
    expect_all_near(feature_to_distribution(TD::full({4, 4, 3}, 1.3), proj, 4, 4), 1.0 / 3, 1e-15, "uniform");
  });
  r.run("feature_to_distribution: matching grid skips the resize", [] {
    std::mt19937_64 rng(29);
    TD f = randn(rng, {3, 4, 2}), proj = randn(rng, {1, 1, 2, 3});
    expect(bit_equal(feature_to_distribution(f, proj, 3, 4), softmax(conv2d(f, proj), -1)), "resized");
  });
  r.run("feature_to_distribution: rows are on the simplex", [] {
    std::mt19937_64 rng(30);
    TD d = feature_to_distribution(randn(rng, {3, 3, 4}, 5.0), randn(rng, {1, 1, 4, 3}), 6, 6);
    for (int p = 0; p < 36; ++p) {
      double s = 0;
      for (int c = 0; c < 3; ++c) {
        expect(d[p * 3 + c] >= 0, "negative");
        s += d[p * 3 + c];
      }
      expect_near(s, 1.0, 1e-6, "sum");
    }
  });
  r.run("cfal: identical inputs give 0", [] {
    std::mt19937_64 rng(31);
    TD f = randn(rng, {3, 3, 4}), proj = randn(rng, {1, 1, 4, 3});
    TD p = feature_to_distribution(f, proj, 3, 3);
    expect_near(cfal(p, p).item(), 0.0, 1e-15, "cfal");
  });
  r.run("cfal: symmetric", [] {
    std::mt19937_64 rng(32);
    TD p = softmax(randn(rng, {4, 4, 3}), -1), q = softmax(randn(rng, {4, 4, 3}), -1);
    expect_near(cfal(p, q).item(), cfal(q, p).item(), 1e-6, "swap");
  });
  r.run("branch_grad_norms: a branch multiplied by 0 has G = 0", [] {
    ParamStore<double> store;
    TD a = store.add("highfreq/w", BranchTag::HighFreq, TD::from({2}, {1.0, 2.0}));
    TD b = store.add("shortrange/w", BranchTag::ShortRange, TD::from({2}, {3.0, 4.0}));
    auto norms = branch_grad_norms(add(sum(mul(a, a)), scale(sum(b), 0.0)), store);
    expect_near(norms.at(BranchTag::ShortRange), 0.0, 0, "dead branch");
    expect(norms.at(BranchTag::HighFreq) > 0, "live branch");
  });
  r.run("branch_grad_norms: loss 3p gives G = 3", [] {
    ParamStore<double> store;
    TD p = store.add("highfreq/p", BranchTag::HighFreq, TD::scalar(0.4));
    auto norms = branch_grad_norms(scale(p, 3.0), store);
    expect_near(norms.at(BranchTag::HighFreq), 3.0, 1e-15, "G");
    expect(!norms.count(BranchTag::LongRange), "empty tag present");
  });
  r.run("cfbl: equal norms give 0", [] {
    expect_near(cfbl({{BranchTag::HighFreq, 2.0}, {BranchTag::ShortRange, 2.0}, {BranchTag::LongRange, 2.0}}), 0, 0,
                "cfbl");
  });
  r.run("cfbl: a single branch gives 0", [] { expect_near(cfbl({{BranchTag::LongRange, 7.0}}), 0, 0, "cfbl"); });
  r.run("total_loss: lambda1 = lambda2 = 0 leaves lambda3 ce", [] {
    LossWeights w{0.0, 0.0, 0.7};
    expect_near(total_loss(1.3, 5.0, 9.0, w).total, 0.7 * 1.3, 1e-15, "total");
  });
  r.run("total_loss: zero components give 0", [] {
    expect_near(total_loss(0, 0, 0, LossWeights{}).total, 0, 0, "total");
  });
}

void model_cases(Runner& r) {
  r.run("forward: L = 2 toy config on 32x32 gives 32x32x2 logits", [] {
    F2Net<float> m(small_model_config(2));
    std::mt19937_64 rng(33);
    expect(predict_logits(m, randu_image(rng, 32, 32)).shape() == Shape({32, 32, 2}), "shape");
  });
  r.run("forward: zero head gives uniform posteriors and CE = ln 2", [] {
    F2Net<float> m(small_model_config(2));
    fill(m.head_weight, 0.0f);
    fill(m.head_bias, 0.0f);
    std::mt19937_64 rng(34);
    Tensor<float> logits = predict_logits(m, randu_image(rng, 32, 32));
    expect_all_near(softmax(logits, -1), 0.5, 1e-7, "posterior");
    std::vector<int> labels(32 * 32);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
    // float32 mean over 1024 pixels
    expect_near(ce_loss(logits, labels).item(), std::log(2.0), 2e-5, "ce");
  });
  auto batch = [](std::uint64_t seed, int classes) {
    std::mt19937_64 rng(seed);
    std::vector<TrainSample<float>> b;
    for (int i = 0; i < 2; ++i) {
      TrainSample<float> s{randu_image(rng, 32, 32), std::vector<int>(32 * 32)};
      for (auto& l : s.labels) l = static_cast<int>(rng() % classes);
      b.push_back(std::move(s));
    }
    return b;
  };
  r.run("train_step: lr 0 leaves parameters unchanged", [&] {
    F2NetConfig cfg = small_model_config(3);
    cfg.optim.lr0 = 0.0;
    F2Net<float> m(cfg);
    std::vector<std::vector<float>> before;
    for (const auto& p : m.params().params()) before.emplace_back(p.value.data().begin(), p.value.data().end());
    Trainer<float> t(m);
    auto b = batch(35, 3);
    LossReport rep = t.step(b);
    std::size_t i = 0;
    for (const auto& p : m.params().params()) {
      expect(std::equal(p.value.data().begin(), p.value.data().end(), before[i++].begin()), "moved: " + p.path);
    }
    expect(rep.ce > 0 && rep.branch_grad_norms.size() == 3 && std::isfinite(rep.total), "report not populated");
  });
  r.run("train_step: fixed seed reproduces the report sequence", [&] {
    auto trajectory = [&] {
      F2Net<float> m(small_model_config(3));
      Trainer<float> t(m);
      auto b = batch(36, 3);
      std::vector<std::string> rows;
      for (int s = 0; s < 3; ++s) rows.push_back(loss_csv_row(t.step(b)));
      return rows;
    };
    expect(trajectory() == trajectory(), "trajectories differ");
  });
  r.run("poly_lr: iteration 0 gives lr0", [] { expect_near(poly_lr(0, 100, 1e-3, 0.9), 1e-3, 0, "lr"); });
  r.run("poly_lr: final iteration gives 0", [] { expect_near(poly_lr(100, 100, 1e-3, 0.9), 0, 0, "lr"); });
  r.run("predict: image smaller than the tile is one whole pass", [] {
    F2Net<float> m(small_model_config(3));
    std::mt19937_64 rng(37);
    Tensor<float> img = randu_image(rng, 40, 40);
    expect(bit_equal(predict_logits_tiled(m, img, 64, 16), predict_logits(m, img)), "differs");
  });
  r.run("predict: constant image gives a constant label map on both paths", [] {
    F2Net<float> m(small_model_config(3));
    Tensor<float> img = Tensor<float>::full({96, 96, 3}, 0.4f);
    for (int tile : {0, 64}) {
      SegmentationMap s = predict(m, img, tile, 16);
      expect(std::all_of(s.labels.begin(), s.labels.end(), [&](int l) { return l == s.labels[0]; }),
             "labels vary (tile " + std::to_string(tile) + ")");
    }
  });
  r.run("checkpoint: save, load, forward is bit-exact", [] {
    TempDir dir("ckpt");
    F2NetConfig cfg = small_model_config(3);
    F2Net<float> a(cfg);
    std::mt19937_64 rng(38);
    Tensor<float> img = randu_image(rng, 32, 32);
    save_checkpoint(dir.path / "m.ckpt", a);
    cfg.seed = 99;
    F2Net<float> b(cfg);
    load_checkpoint(dir.path / "m.ckpt", b);
    expect(bit_equal(predict_logits(a, img), predict_logits(b, img)), "forward differs");
  });
  r.run("checkpoint: truncated file is a corrupt-file error", [] {
    TempDir dir("trunc");
    F2Net<float> a(small_model_config(3));
    save_checkpoint(dir.path / "m.ckpt", a);
    fs::resize_file(dir.path / "m.ckpt", fs::file_size(dir.path / "m.ckpt") - 10);
    bool caught = false;
    try {
      load_checkpoint(dir.path / "m.ckpt", a);
    } catch (const CheckpointCorruptError&) {
      caught = true;
    }
    expect(caught, "no corrupt-file error");
  });
  r.run("checkpoint: depths [1,1] into [2,2] names the first offending path", [] {
    TempDir dir("shape");
    F2NetConfig cfg = small_model_config(3);
    cfg.hf.num_stages = 2;
    cfg.hf.stage_depths = {1, 1};
    F2Net<float> a(cfg);
    save_checkpoint(dir.path / "m.ckpt", a);
    cfg.hf.stage_depths = {2, 2};
    F2Net<float> b(cfg);
    std::string path;
    try {
      load_checkpoint(dir.path / "m.ckpt", b);
    } catch (const CheckpointShapeError& e) {
      path = e.path();
    }
    expect(path.rfind("highfreq/stage0/block1/", 0) == 0, "offending path was '" + path + "'");
  });
}

void data_cases(Runner& r) {
  auto read_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  r.run("gen_synthetic: same seed gives byte-identical files", [&] {
    TempDir a("gen_a"), b("gen_b");
    gen_synthetic(a.path, 5, 4, 32, 3);
    gen_synthetic(b.path, 5, 4, 32, 3);
    for (const auto& e : fs::recursive_directory_iterator(a.path)) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), a.path);
      expect(read_bytes(e.path()) == read_bytes(b.path / rel), "differs: " + rel.string());
    }
  });
  r.run("gen_synthetic: classes = 2 gives binary masks", [] {
    TempDir d("gen_bin");
    DatasetSpec spec = gen_synthetic(d.path, 3, 2, 32, 2);
    LoadedPair p = load_pair(spec.image_path("train", spec.train[0]), spec.mask_path("train", spec.train[0]), spec);
    expect(std::all_of(p.mask.labels.begin(), p.mask.labels.end(), [](int l) { return l == 0 || l == 1; }),
           "non-binary label");
    expect(std::count(p.mask.labels.begin(), p.mask.labels.end(), 1) > 0, "no foreground");
  });
  r.run("mask codec: random mask round-trips", [] {
    TempDir d("codec");
    DatasetSpec spec = default_dataset_spec(5);
    std::mt19937_64 rng(39);
    SegmentationMap m{7, 9, std::vector<int>(63), {}};
    for (auto& l : m.labels) l = rng() % 6 == 5 ? spec.ignore_index : static_cast<int>(rng() % 5);
    write_mask(d.path / "m.png", m, spec);
    int warnings = 0;
    SegmentationMap back = decode_mask(read_png(d.path / "m.png"), spec, &warnings);
    expect(back.labels == m.labels && warnings == 0, "round trip changed labels");
    expect(decode_mask(encode_mask(m, spec), spec).labels == m.labels, "in-memory round trip");
  });
  r.run("mask codec: off-palette pixel becomes ignore with one warning", [] {
    DatasetSpec spec = default_dataset_spec(3);
    SegmentationMap m{2, 2, {0, 1, 2, 0}, {}};
    Image8 img = encode_mask(m, spec);
    img.pixels[3] = 17;
    img.pixels[4] = 99;
    int warnings = 0;
    SegmentationMap back = decode_mask(img, spec, &warnings);
    expect(back.labels[1] == spec.ignore_index && warnings == 1, "off-palette handling");
  });
  r.run("image: 8-bit 255 decodes to 1.0", [] {
    TempDir d("img");
    Image8 img{2, 2, 3, std::vector<std::uint8_t>(12, 255)};
    write_png(d.path / "i.png", img);
    expect_all_near(image_to_tensor(read_png(d.path / "i.png")), 1.0, 0, "normalisation");
  });
  r.run("tile_plan: 64x64 with tile 64 is one window", [] {
    expect(tile_plan(64, 64, 64, 0).windows.size() == 1, "windows");
  });
  r.run("tile_plan: overlap 0 partitions the image", [] {
    for (int h : {64, 100, 130}) {
      TilePlan p = tile_plan(h, 77, 32, 0);
      std::vector<int> cover(static_cast<std::size_t>(h) * 77, 0);
      for (const auto& w : p.windows) {
        for (int y = w.row; y < w.row + w.height; ++y) {
          for (int x = w.col; x < w.col + w.width; ++x) ++cover[static_cast<std::size_t>(y) * 77 + x];
        }
      }
      expect(std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; }), "not a partition");
    }
  });
}

void metric_cases(Runner& r) {
  r.run("accumulate: equal maps on 4 pixels fill the diagonal", [] {
    ConfusionMatrix cm(2);
    SegmentationMap m{2, 2, {0, 1, 1, 0}, {}};
    cm.accumulate(m, m);
    expect(cm.at(0, 0) + cm.at(1, 1) == 4 && cm.total() == 4, "diagonal");
  });
  r.run("accumulate: all-ignore ground truth only counts ignored", [] {
    ConfusionMatrix cm(3);
    SegmentationMap gt{1, 3, {255, 255, 255}, {}}, pred{1, 3, {0, 1, 2}, {}};
    cm.accumulate(pred, gt, 255);
    expect(cm.total() == 0 && cm.ignored_pixels() == 3, "ignore");
  });
  r.run("metrics: perfect prediction scores 1", [] {
    ConfusionMatrix cm(3);
    SegmentationMap m{2, 3, {0, 1, 2, 2, 1, 0}, {}};
    cm.accumulate(m, m);
    expect(miou(cm) == 1.0 && f1(cm) == 1.0 && accuracy(cm) == 1.0, "not 1");
  });
  r.run("metrics: absent class is excluded from mIoU", [] {
    ConfusionMatrix cm(4);
    SegmentationMap gt{1, 4, {0, 0, 1, 1}, {}}, pred{1, 4, {0, 1, 1, 1}, {}};
    cm.accumulate(pred, gt);
    expect_near(miou(cm), (0.5 + 2.0 / 3) / 2, 1e-15, "miou");
  });
}

void config_cases(Runner& r) {
  r.run("parse_config: {} gives valid defaults", [] {
    TempDir d("cfg");
    std::ofstream(d.path / "c.json") << "{}";
    F2NetConfig c = parse_config((d.path / "c.json").string());
    expect(to_json(c) == to_json(F2NetConfig{}), "not defaults");
  });
  r.run("parse_config: afd.groups=5 names both fields", [] {
    std::string msg;
    try {
      parse_config("", {"afd.groups=5"});
    } catch (const ConfigError& e) {
      msg = e.what();
    }
    expect(msg.find("afd.groups") != std::string::npos && msg.find("afd.embed_dim") != std::string::npos,
           "message was '" + msg + "'");
  });
  r.run("parse_config: loss.lambda2=0 disables balancing", [] {
    F2NetConfig cfg = parse_config("", {"loss.lambda2=0"});
    expect(cfg.loss.lambda2 == 0.0, "override ignored");
    F2NetConfig toy = small_model_config(3);
    toy.loss = cfg.loss;
    F2Net<float> m(toy);
    Trainer<float> t(m);
    std::mt19937_64 rng(40);
    std::vector<TrainSample<float>> b{{randu_image(rng, 32, 32), std::vector<int>(32 * 32, 1)}};
    for (int s = 0; s < 2; ++s) t.step(b);
    expect(t.balancer().weights().empty(), "balancer moved");
  });
}

}  // namespace

SelftestReport run_selftest(std::ostream* log) {
  Runner r(log);
  tensor_core_cases(r);
  afd_cases(r);
  hf_cases(r);
  lf_cases(r);
  hff_cases(r);
  objective_cases(r);
  model_cases(r);
  data_cases(r);
  metric_cases(r);
  config_cases(r);
  return r.report();
}

}  // namespace f2net
