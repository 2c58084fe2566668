// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "f2net/data_io.hpp"

namespace f2net {

namespace {

int round_up(int v, int m) { return (v + m - 1) / m * m; }

// Bilinear resize that is a no-op for matching grids.
template <typename T>
Tensor<T> to_grid(const Tensor<T>& x, int h, int w) {
  if (x.dim(0) == h && x.dim(1) == w) return x;
  return bilinear_resize(x, h, w);
}

template <typename T>
const Tensor<T>& finer(const Tensor<T>& a, const Tensor<T>& b) {
  return a.dim(0) * a.dim(1) >= b.dim(0) * b.dim(1) ? a : b;
}

}  // namespace

template <typename T>
F2Net<T>::F2Net(const F2NetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Initializer<T> init(cfg_.seed);
  afd_.emplace(cfg_.afd, cfg_.in_channels, store_, init);
  const int d = cfg_.afd.embed_dim;
  const int factor = cfg_.afd.lf_downsample_factor;
  if (cfg_.branches.highfreq) hf_.emplace(cfg_.hf, d, store_, init);
  if (cfg_.branches.shortrange) short_.emplace(cfg_.lf, d, store_, init);
  if (cfg_.branches.longrange) {
    const int grid = std::max(1, cfg_.reference_size / factor / cfg_.lf.patch_size);
    long_.emplace(cfg_.lf, d, grid, store_, init);
  }

  int c_sl = 0;
  if (short_ && long_) {
    fuse_lf_.emplace(short_->out_channels(), long_->out_channels(), cfg_.fusion.squeeze_ratio,
                     store_, init, "fusion/lf");
    c_sl = fuse_lf_->out_channels();
  } else if (short_) {
    c_sl = short_->out_channels();
  } else if (long_) {
    c_sl = long_->out_channels();
  }
  const int c_m = hf_ ? hf_->out_channels() : 0;
  int c_out = c_sl > 0 ? c_sl : c_m;
  if (c_sl > 0 && c_m > 0) {
    fuse_final_.emplace(c_sl, c_m, cfg_.fusion.squeeze_ratio, store_, init, "fusion/final");
    c_out = fuse_final_->out_channels();
  }
  const int classes = cfg_.num_classes;
  // Small head: near-uniform posteriors at step 0 keep the first updates to
  // the branches from being dominated by a large initial loss.
  head_weight = store_.add("head/weight", BranchTag::Head, init.normal({1, 1, c_out, classes}, 0.01));
  head_bias = store_.add("head/bias", BranchTag::Head, init.zeros({classes}));

  // Fixed random projections into the shared distribution space. They are
  // not trained: a learned pair could collapse both sides onto one class.
  if (c_sl > 0 && c_m > 0) {
    const int common = cfg_.fusion.cfal_channels > 0 ? cfg_.fusion.cfal_channels : classes;
    align_projection_sl = store_.add("align/projection_sl", BranchTag::Head,
                                     init.kaiming({1, 1, c_sl, common}, c_sl), false);
    align_projection_m = store_.add("align/projection_m", BranchTag::Head,
                                    init.kaiming({1, 1, c_m, common}, c_m), false);
  }
}

template <typename T>
ForwardOutputs<T> F2Net<T>::forward(const Tensor<T>& image) const {
  if (image.rank() != 3 || image.dim(2) != cfg_.in_channels) {
    throw DimensionError("forward: expected [H, W, " + std::to_string(cfg_.in_channels) +
                         "] image, got " + shape_str(image.shape()));
  }
  const int h = image.dim(0), w = image.dim(1);
  const int m = cfg_.spatial_multiple();
  const int ph = round_up(std::max(h, cfg_.min_side()), m);
  const int pw = round_up(std::max(w, cfg_.min_side()), m);
  Tensor<T> padded = (ph == h && pw == w) ? image : pad_replicate(image, 0, 0, ph - h, pw - w);

  ForwardOutputs<T> out;
  out.stem = afd_->stem(padded);
  out.frequency = afd_->decompose(out.stem);
  auto& br = out.branches;
  if (hf_) br.f_m = hf_->forward(out.frequency.hf);
  if (short_ || long_) {
    out.lf_down = downsample_lf(out.frequency.lf, cfg_.afd.lf_downsample_factor);
    if (short_) br.f_s = short_->forward(out.lf_down);
    if (long_) br.f_l = long_->forward(out.lf_down);
    if (short_ && long_) {
      br.f_sl = fuse_lf_->fuse(br.f_s, to_grid(br.f_l, br.f_s.dim(0), br.f_s.dim(1)));
    } else {
      br.f_sl = short_ ? br.f_s : br.f_l;
    }
  }
  if (br.f_sl.defined() && br.f_m.defined()) {
    const Tensor<T>& grid = finer(br.f_sl, br.f_m);
    out.fused = fuse_final_->fuse(to_grid(br.f_sl, grid.dim(0), grid.dim(1)),
                                  to_grid(br.f_m, grid.dim(0), grid.dim(1)));
  } else {
    out.fused = br.f_sl.defined() ? br.f_sl : br.f_m;
  }
  Tensor<T> logits = to_grid(conv2d(out.fused, head_weight, head_bias), ph, pw);
  out.logits = (ph == h && pw == w) ? logits : crop(logits, 0, 0, h, w);
  return out;
}

template <typename T>
Tensor<T> F2Net<T>::alignment_loss(const ForwardOutputs<T>& out) const {
  const auto& br = out.branches;
  if (!br.f_sl.defined() || !br.f_m.defined()) return Tensor<T>::scalar(T(0));
  const Tensor<T>& grid = finer(br.f_sl, br.f_m);
  return cfal(feature_to_distribution(br.f_sl, align_projection_sl, grid.dim(0), grid.dim(1)),
              feature_to_distribution(br.f_m, align_projection_m, grid.dim(0), grid.dim(1)));
}

double poly_lr(long iter, long total, double lr0, double power) {
  if (total <= 0 || iter >= total) return 0.0;
  if (iter <= 0) return lr0;
  return lr0 * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(total), power);
}

template <typename T>
Trainer<T>::Trainer(F2Net<T>& model)
    : model_(model),
      rng_(model.config().seed ^ 0x9e3779b97f4a7c15ULL),
      balancer_(model.config().optim.balance_rate) {}

template <typename T>
std::vector<std::size_t> Trainer<T>::sample_indices(std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample_indices: empty dataset");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(static_cast<std::size_t>(model_.config().optim.batch_size));
  for (auto& i : idx) i = pick(rng_);
  return idx;
}

template <typename T>
LossReport Trainer<T>::step(std::span<const TrainSample<T>> batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const F2NetConfig& cfg = model_.config();
  const LossWeights& lw = cfg.loss;
  ParamStore<T>& store = model_.params();
  const T inv_b = T(1) / static_cast<T>(batch.size());

  store.zero_grad();
  std::vector<Tensor<T>> ce_terms, cfal_terms;
  for (const auto& s : batch) {
    ForwardOutputs<T> out = model_.forward(s.image);
    ce_terms.push_back(ce_loss(out.logits, std::span<const int>(s.labels), std::optional<int>(cfg.ignore_index)));
    cfal_terms.push_back(model_.alignment_loss(out));
  }
  auto batch_mean = [&](const std::vector<Tensor<T>>& terms) {
    Tensor<T> acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return scale(acc, inv_b);
  };
  Tensor<T> ce = batch_mean(ce_terms);
  Tensor<T> align = batch_mean(cfal_terms);

  // The CE gradient doubles as the probe for the branch norms.
  BranchNorms raw;
  if (lw.lambda3 > 0) {
    backward(ce, static_cast<T>(lw.lambda3));
    raw = collect_branch_norms(store, 1.0 / lw.lambda3);
  } else {
    backward(ce);
    raw = collect_branch_norms(store);
    store.zero_grad();
  }
  if (lw.lambda1 > 0 && align.requires_grad()) backward(align, static_cast<T>(lw.lambda1));

  const BranchNorms norms = balancer_.effective(raw);
  const double cfbl_value = cfbl(norms);
  LossReport report = total_loss(static_cast<double>(ce.item()), static_cast<double>(align.item()),
                                 cfbl_value, lw, norms);
  report.step = iteration_;
  report.lr = poly_lr(iteration_, cfg.optim.total_iters, cfg.optim.lr0, cfg.optim.poly_power);

  if (!std::isfinite(report.total)) {
    std::ostringstream os;
    os << "non-finite loss at step " << iteration_ << " (ce=" << report.ce << ", cfal=" << report.cfal
       << ", cfbl=" << report.cfbl << "); branch gradient norms:";
    for (const auto& [tag, g] : raw) os << ' ' << to_string(tag) << '=' << g;
    throw std::runtime_error(os.str());
  }

  if (lw.lambda2 > 0) {
    balancer_.update(norms);
    for (auto& p : store.params()) {
      const double wb = balancer_.weight(p.tag);
      if (!p.trainable || wb == 1.0 || !p.value.has_grad()) continue;
      for (T& g : p.value.mutable_grad()) g *= static_cast<T>(wb);
    }
  }

  const T lr = static_cast<T>(report.lr);
  const T mom = static_cast<T>(cfg.optim.momentum);
  for (auto& p : store.params()) {
    if (!p.trainable || !p.value.has_grad()) continue;
    auto theta = p.value.mutable_data();
    auto g = p.value.grad();
    if (p.momentum.size() != theta.size()) p.momentum.assign(theta.size(), T(0));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      p.momentum[i] = mom * p.momentum[i] + g[i];
      theta[i] -= lr * p.momentum[i];
    }
  }
  ++iteration_;
  return report;
}

template <typename T>
TrainingState Trainer<T>::state() const {
  TrainingState s;
  s.iteration = iteration_;
  std::ostringstream os;
  os << rng_;
  s.rng_state = os.str();
  s.balance_weights = balancer_.weights();
  return s;
}

template <typename T>
void Trainer<T>::restore(const TrainingState& s) {
  iteration_ = s.iteration;
  if (!s.rng_state.empty()) {
    std::istringstream is(s.rng_state);
    is >> rng_;
    if (!is) throw std::invalid_argument("restore: malformed RNG state");
  }
  balancer_.set_weights(s.balance_weights);
}

template <typename T>
Tensor<T> predict_logits(const F2Net<T>& model, const Tensor<T>& image) {
  NoGradGuard guard;
  return model.forward(image).logits.detach();
}

namespace {

// Ramp weight of a pixel `d` pixels inside an interior tile edge.
double ramp(int d, int overlap) {
  if (overlap <= 0) return 1.0;
  return std::min(1.0, (d + 0.5) / overlap);
}

}  // namespace

template <typename T>
Tensor<T> predict_logits_tiled(const F2Net<T>& model, const Tensor<T>& image, int tile, int overlap) {
  const int h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const TilePlan plan = tile_plan(h, w, tile, overlap);
  if (plan.windows.size() == 1) return predict_logits(model, image);

  const int classes = model.config().num_classes;
  std::vector<double> acc(static_cast<std::size_t>(h) * w * classes, 0.0);
  std::vector<double> wsum(static_cast<std::size_t>(h) * w, 0.0);
  auto src = image.data();
  for (const TileWindow& win : plan.windows) {
    std::vector<T> patch(static_cast<std::size_t>(win.height) * win.width * c);
    for (int y = 0; y < win.height; ++y) {
      const auto* row = &src[(static_cast<std::size_t>(win.row + y) * w + win.col) * c];
      std::copy(row, row + static_cast<std::size_t>(win.width) * c,
                patch.begin() + static_cast<std::size_t>(y) * win.width * c);
    }
    Tensor<T> logits = predict_logits(model, Tensor<T>::from({win.height, win.width, c}, std::move(patch)));
    auto ld = logits.data();
    const bool top = win.row > 0, bottom = win.row + win.height < h;
    const bool left = win.col > 0, right = win.col + win.width < w;
    for (int y = 0; y < win.height; ++y) {
      double wy = 1.0;
      if (top) wy = std::min(wy, ramp(y, overlap));
      if (bottom) wy = std::min(wy, ramp(win.height - 1 - y, overlap));
      for (int x = 0; x < win.width; ++x) {
        double wx = 1.0;
        if (left) wx = std::min(wx, ramp(x, overlap));
        if (right) wx = std::min(wx, ramp(win.width - 1 - x, overlap));
        const double wt = wy * wx;
        const std::size_t pix = static_cast<std::size_t>(win.row + y) * w + (win.col + x);
        wsum[pix] += wt;
        const std::size_t off = (static_cast<std::size_t>(y) * win.width + x) * classes;
        for (int k = 0; k < classes; ++k) acc[pix * classes + k] += wt * static_cast<double>(ld[off + k]);
      }
    }
  }
  std::vector<T> out(acc.size());
  for (std::size_t pix = 0; pix < wsum.size(); ++pix) {
    for (int k = 0; k < classes; ++k) out[pix * classes + k] = static_cast<T>(acc[pix * classes + k] / wsum[pix]);
  }
  return Tensor<T>::from({h, w, classes}, std::move(out));
}

template <typename T>
SegmentationMap argmax_labels(const Tensor<T>& scores) {
  if (scores.rank() != 3) throw DimensionError("argmax_labels: expected [H, W, L], got " + shape_str(scores.shape()));
  SegmentationMap map;
  map.height = scores.dim(0);
  map.width = scores.dim(1);
  const int classes = scores.dim(2);
  auto d = scores.data();
  map.labels.resize(static_cast<std::size_t>(map.height) * map.width);
  for (std::size_t pix = 0; pix < map.labels.size(); ++pix) {
    const auto* row = &d[pix * classes];
    map.labels[pix] = static_cast<int>(std::max_element(row, row + classes) - row);
  }
  return map;
}

template <typename T>
SegmentationMap predict(const F2Net<T>& model, const Tensor<T>& image, int tile, int overlap) {
  Tensor<T> logits = tile > 0 ? predict_logits_tiled(model, image, tile, overlap) : predict_logits(model, image);
  Tensor<T> probs;
  {
    NoGradGuard guard;
    probs = softmax(logits, -1);
  }
  SegmentationMap map = argmax_labels(probs);
  auto pd = probs.data();
  map.scores = Tensor<float>::from(probs.shape(), std::vector<float>(pd.begin(), pd.end()));
  return map;
}

#define F2NET_MODEL_INSTANTIATE(T)                                                          \
  template class F2Net<T>;                                                                  \
  template class Trainer<T>;                                                                \
  template Tensor<T> predict_logits(const F2Net<T>&, const Tensor<T>&);                     \
  template Tensor<T> predict_logits_tiled(const F2Net<T>&, const Tensor<T>&, int, int);     \
  template SegmentationMap argmax_labels(const Tensor<T>&);                                 \
  template SegmentationMap predict(const F2Net<T>&, const Tensor<T>&, int, int);

F2NET_MODEL_INSTANTIATE(float)
F2NET_MODEL_INSTANTIATE(double)

}  // namespace f2net
