// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/hf_branch.hpp"

namespace f2net {

namespace {
constexpr double kNormEps = 1e-5;

const char* direction_name(ScanDirection d) {
  switch (d) {
    case ScanDirection::RowForward: return "row_fwd";
    case ScanDirection::RowBackward: return "row_bwd";
    case ScanDirection::ColForward: return "col_fwd";
    case ScanDirection::ColBackward: return "col_bwd";
  }
  return "?";
}
}  // namespace

template <typename T>
VssBlockParams<T> make_vss_block(ParamStore<T>& store, const std::string& prefix, int c,
                                 const HfBranchConfig& cfg, Initializer<T>& init,
                                 const std::vector<ScanDirection>& directions) {
  const BranchTag tag = BranchTag::HighFreq;
  VssBlockParams<T> p;
  p.norm1_gamma = store.add(prefix + "/norm1/gamma", tag, init.ones({c}));
  p.norm1_beta = store.add(prefix + "/norm1/beta", tag, init.zeros({c}));
  for (ScanDirection d : directions) {
    const std::string s = prefix + "/ss2d/" + direction_name(d);
    ScanProjection<T> sp{d, {}, {}, {}, {}};
    sp.gate_weight = store.add(s + "/gate/weight", tag, init.kaiming({c, c}, c));
    sp.gate_bias = store.add(s + "/gate/bias", tag,
                             Tensor<T>::full({c}, static_cast<T>(cfg.ssm_state_mixing)));
    sp.value_weight = store.add(s + "/value/weight", tag, init.kaiming({c, c}, c));
    sp.value_bias = store.add(s + "/value/bias", tag, init.zeros({c}));
    p.scans.push_back(std::move(sp));
  }
  p.out_weight = store.add(prefix + "/ss2d/out/weight", tag, init.kaiming({c, c}, c));
  p.out_bias = store.add(prefix + "/ss2d/out/bias", tag, init.zeros({c}));
  p.norm2_gamma = store.add(prefix + "/norm2/gamma", tag, init.ones({c}));
  p.norm2_beta = store.add(prefix + "/norm2/beta", tag, init.zeros({c}));
  const int hidden = c * cfg.ffn_expansion;
  p.ffn_weight1 = store.add(prefix + "/ffn/fc1/weight", tag, init.kaiming({c, hidden}, c));
  p.ffn_bias1 = store.add(prefix + "/ffn/fc1/bias", tag, init.zeros({hidden}));
  p.ffn_weight2 = store.add(prefix + "/ffn/fc2/weight", tag, init.kaiming({hidden, c}, hidden));
  p.ffn_bias2 = store.add(prefix + "/ffn/fc2/bias", tag, init.zeros({c}));
  return p;
}

template <typename T>
Tensor<T> ss2d_scan(const Tensor<T>& x, const VssBlockParams<T>& p) {
  Tensor<T> acc;
  for (const auto& s : p.scans) {
    Tensor<T> gate = sigmoid(linear(x, s.gate_weight, s.gate_bias));
    Tensor<T> value = linear(x, s.value_weight, s.value_bias);
    Tensor<T> h = directional_scan(gate, value, s.direction);
    acc = acc.defined() ? add(acc, h) : h;
  }
  if (!acc.defined()) acc = Tensor<T>::zeros(x.shape());
  return linear(acc, p.out_weight, p.out_bias);
}

template <typename T>
Tensor<T> vss_block(const Tensor<T>& z, const VssBlockParams<T>& p) {
  Tensor<T> z1 = add(z, ss2d_scan(layernorm(z, p.norm1_gamma, p.norm1_beta, T(kNormEps)), p));
  Tensor<T> n2 = layernorm(z1, p.norm2_gamma, p.norm2_beta, T(kNormEps));
  Tensor<T> ffn = linear(gelu(linear(n2, p.ffn_weight1, p.ffn_bias1)), p.ffn_weight2, p.ffn_bias2);
  return add(z1, ffn);
}

template <typename T>
HighFrequencyBranch<T>::HighFrequencyBranch(const HfBranchConfig& cfg, int in_channels,
                                            ParamStore<T>& store, Initializer<T>& init,
                                            const std::string& prefix)
    : cfg_(cfg) {
  if (static_cast<int>(cfg.stage_depths.size()) != cfg.num_stages || cfg.num_stages < 1) {
    throw ConfigError("hf.stage_depths length must equal hf.num_stages");
  }
  const BranchTag tag = BranchTag::HighFreq;
  int c = cfg.base_channels;
  embed_weight = store.add(prefix + "/embed/weight", tag, init.kaiming({3, 3, in_channels, c}, 9 * in_channels));
  embed_bias = store.add(prefix + "/embed/bias", tag, init.zeros({c}));
  for (int s = 0; s < cfg.num_stages; ++s) {
    std::vector<VssBlockParams<T>> blocks;
    for (int b = 0; b < cfg.stage_depths[s]; ++b) {
      blocks.push_back(make_vss_block(
          store, prefix + "/stage" + std::to_string(s) + "/block" + std::to_string(b), c, cfg, init));
    }
    stages.push_back(std::move(blocks));
    if (s + 1 < cfg.num_stages) {
      const std::string d = prefix + "/down" + std::to_string(s);
      down_weight.push_back(store.add(d + "/weight", tag, init.kaiming({3, 3, c, 2 * c}, 9 * c)));
      down_bias.push_back(store.add(d + "/bias", tag, init.zeros({2 * c})));
      c *= 2;
    }
  }
}

template <typename T>
int HighFrequencyBranch<T>::out_channels() const {
  return cfg_.base_channels << (cfg_.num_stages - 1);
}

template <typename T>
Tensor<T> HighFrequencyBranch<T>::embed(const Tensor<T>& hf) const {
  return conv2d(hf, embed_weight, embed_bias, 2, Padding::Replicate);
}

template <typename T>
Tensor<T> HighFrequencyBranch<T>::forward(const Tensor<T>& hf) const {
  const int min_side = 1 << (cfg_.num_stages + 1);
  if (hf.dim(0) < min_side || hf.dim(1) < min_side) {
    throw ConfigError("high-frequency branch with " + std::to_string(cfg_.num_stages) +
                      " stages needs inputs of at least " + std::to_string(min_side) +
                      " per side, got " + shape_str(hf.shape()));
  }
  Tensor<T> z = embed(hf);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    for (const auto& block : stages[s]) z = vss_block(z, block);
    if (s < down_weight.size()) z = conv2d(z, down_weight[s], down_bias[s], 2, Padding::Replicate);
  }
  return z;
}

template VssBlockParams<float> make_vss_block(ParamStore<float>&, const std::string&, int,
                                              const HfBranchConfig&, Initializer<float>&,
                                              const std::vector<ScanDirection>&);
template VssBlockParams<double> make_vss_block(ParamStore<double>&, const std::string&, int,
                                               const HfBranchConfig&, Initializer<double>&,
                                               const std::vector<ScanDirection>&);
template Tensor<float> ss2d_scan(const Tensor<float>&, const VssBlockParams<float>&);
template Tensor<double> ss2d_scan(const Tensor<double>&, const VssBlockParams<double>&);
template Tensor<float> vss_block(const Tensor<float>&, const VssBlockParams<float>&);
template Tensor<double> vss_block(const Tensor<double>&, const VssBlockParams<double>&);
template class HighFrequencyBranch<float>;
template class HighFrequencyBranch<double>;

}  // namespace f2net
