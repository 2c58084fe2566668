// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <vector>

namespace f2net {

template <typename T>
Tensor<T> feature_to_distribution(const Tensor<T>& features, const Tensor<T>& projection,
                                  int target_h, int target_w) {
  Tensor<T> z = conv2d(features, projection);
  if (z.dim(0) != target_h || z.dim(1) != target_w) z = bilinear_resize(z, target_h, target_w);
  return softmax(z, -1);
}

template <typename T>
BranchNorms collect_branch_norms(const ParamStore<T>& params, double scale) {
  std::map<BranchTag, double> sq;
  for (const auto& p : params.params()) {
    if (!p.trainable) continue;
    const bool balanced = std::find(std::begin(kBalancedBranches), std::end(kBalancedBranches),
                                    p.tag) != std::end(kBalancedBranches);
    if (!balanced) continue;
    double& acc = sq[p.tag];
    if (!p.value.has_grad()) continue;
    for (T g : p.value.grad()) acc += static_cast<double>(g) * g;
  }
  BranchNorms out;
  for (const auto& [tag, s] : sq) out[tag] = std::sqrt(s) * scale;
  return out;
}

template <typename T>
BranchNorms branch_grad_norms(const Tensor<T>& ce, ParamStore<T>& params) {
  std::vector<std::vector<T>> stash;
  for (auto& p : params.params()) {
    if (p.value.has_grad()) {
      stash.emplace_back(p.value.grad().begin(), p.value.grad().end());
    } else {
      stash.emplace_back();
    }
    p.value.zero_grad();
  }
  backward(ce);
  BranchNorms norms = collect_branch_norms(params);
  std::size_t i = 0;
  for (auto& p : params.params()) {
    auto g = p.value.mutable_grad();
    const auto& s = stash[i++];
    if (s.empty()) std::fill(g.begin(), g.end(), T(0));
    else std::copy(s.begin(), s.end(), g.begin());
  }
  return norms;
}

double mean_norm(const BranchNorms& norms) {
  if (norms.empty()) return 0.0;
  double s = 0;
  for (const auto& [tag, g] : norms) s += g;
  return s / static_cast<double>(norms.size());
}

double cfbl(const BranchNorms& norms) {
  const double m = mean_norm(norms);
  double s = 0;
  for (const auto& [tag, g] : norms) s += std::abs(g - m);
  return s;
}

LossReport total_loss(double ce, double cfal_value, double cfbl_value, const LossWeights& w,
                      const BranchNorms& norms) {
  LossReport r;
  r.ce = ce;
  r.cfal = cfal_value;
  r.cfbl = cfbl_value;
  r.total = w.lambda1 * cfal_value + w.lambda2 * cfbl_value + w.lambda3 * ce;
  r.branch_grad_norms = norms;
  r.mean_grad_norm = mean_norm(norms);
  return r;
}

std::string loss_csv_header() {
  return "step,ce,cfal,cfbl,total,G_highfreq,G_shortrange,G_longrange,G_mean,lr";
}

std::string loss_csv_row(const LossReport& r) {
  std::ostringstream os;
  os << std::setprecision(9) << r.step << ',' << r.ce << ',' << r.cfal << ',' << r.cfbl << ','
     << r.total;
  for (BranchTag t : kBalancedBranches) {
    os << ',';
    if (auto it = r.branch_grad_norms.find(t); it != r.branch_grad_norms.end()) os << it->second;
  }
  os << ',' << r.mean_grad_norm << ',' << r.lr;
  return os.str();
}

double GradientBalancer::weight(BranchTag tag) const {
  auto it = weights_.find(tag);
  return it == weights_.end() ? 1.0 : it->second;
}

BranchNorms GradientBalancer::effective(const BranchNorms& raw) const {
  BranchNorms out;
  for (const auto& [tag, g] : raw) out[tag] = g * weight(tag);
  return out;
}

void GradientBalancer::update(const BranchNorms& effective_norms) {
  BranchNorms live;
  for (const auto& [tag, g] : effective_norms) {
    if (g > 0 && std::isfinite(g)) live[tag] = g;
  }
  if (live.size() < 2) return;
  const double m = mean_norm(live);
  for (const auto& [tag, g] : live) weights_[tag] = weight(tag) * std::pow(m / g, rate_);
  double mw = 0;
  for (const auto& [tag, g] : live) mw += weights_[tag];
  mw /= static_cast<double>(live.size());
  // Clip last so the bounds hold exactly; the mean then sits near 1.
  for (const auto& [tag, g] : live) weights_[tag] = std::clamp(weights_[tag] / mw, 0.1, 10.0);
}

template Tensor<float> feature_to_distribution(const Tensor<float>&, const Tensor<float>&, int, int);
template Tensor<double> feature_to_distribution(const Tensor<double>&, const Tensor<double>&, int, int);
template BranchNorms collect_branch_norms(const ParamStore<float>&, double);
template BranchNorms collect_branch_norms(const ParamStore<double>&, double);
template BranchNorms branch_grad_norms(const Tensor<float>&, ParamStore<float>&);
template BranchNorms branch_grad_norms(const Tensor<double>&, ParamStore<double>&);

}  // namespace f2net
