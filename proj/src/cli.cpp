// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "f2net/checkpoint.hpp"
#include "f2net/data_io.hpp"
#include "f2net/grad_suite.hpp"
#include "f2net/metrics.hpp"
#include "f2net/model.hpp"
#include "f2net/parallel.hpp"
#include "f2net/selftest.hpp"

namespace f2net {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  int threads = 0;
  int verbosity = 0;
  std::vector<std::string> overrides;
};

struct GenDataOptions {
  std::uint64_t seed = 0;
  int count = 64;
  int size = 64;
  int classes = 3;
  std::string out;
};

struct DecomposeOptions {
  std::string image, config, ckpt, out;
};

struct TrainOptions {
  std::string data, config, out_ckpt, log, resume;
  int iters = 0;
  std::optional<std::uint64_t> seed;
};

struct EvalOptions {
  std::string data, ckpt, report;
  std::string split = "val";
  int tile = 0, overlap = 0;
};

struct PredictOptions {
  std::string image, ckpt, out, data;
  int tile = 0, overlap = 0;
  bool heatmaps = false;
};

struct GradcheckOptions {
  std::string config, module;
  std::uint64_t seed = 0;
  int seeds = 1;
  int samples = 3;
};

// Sidecar that records what a run resolved to, next to its main output.
void write_resolved(const fs::path& output, const json& resolved) {
  fs::path p = output;
  p += ".config.json";
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  os << resolved.dump(2) << '\n';
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

F2NetConfig resolve_config(const std::string& path, const GlobalOptions& g) {
  return parse_config(path, g.overrides);
}

F2NetConfig resolve_from_checkpoint(const fs::path& ckpt, const GlobalOptions& g) {
  F2NetConfig c = config_from_json(apply_overrides(to_json(checkpoint_config(ckpt)), g.overrides));
  c.validate();
  return c;
}

void require_file(const std::string& path, const std::string& flag) {
  if (!fs::is_regular_file(path)) throw UsageError(flag + ": no such file '" + path + "'");
}

// Rescales each value to [0, 255] over the span's own range.
std::vector<std::uint8_t> min_max_bytes(const std::vector<double>& v) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<std::uint8_t> out(v.size(), 0);
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (v[i] - lo) / (hi - lo)));
  }
  return out;
}

// Grid of per-channel min-max normalised planes separated by 1-pixel gutters.
Image8 channel_mosaic(const Tensor<float>& t) {
  const int h = t.dim(0), w = t.dim(1), c = t.dim(2);
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(c))));
  const int rows = (c + cols - 1) / cols;
  Image8 img{rows * (h + 1) - 1, cols * (w + 1) - 1, 1, {}};
  img.pixels.assign(static_cast<std::size_t>(img.height) * img.width, 0);
  std::vector<double> plane(static_cast<std::size_t>(h) * w);
  for (int ch = 0; ch < c; ++ch) {
    for (int p = 0; p < h * w; ++p) plane[p] = t[static_cast<std::size_t>(p) * c + ch];
    const auto bytes = min_max_bytes(plane);
    const int r0 = (ch / cols) * (h + 1), c0 = (ch % cols) * (w + 1);
    for (int y = 0; y < h; ++y) {
      std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(y) * w, w,
                  img.pixels.begin() + static_cast<std::ptrdiff_t>(r0 + y) * img.width + c0);
    }
  }
  return img;
}

// L2 magnitude over channels, resampled to the padded input grid and
// cropped to the image.
Image8 magnitude_heatmap(const Tensor<float>& f, int padded_h, int padded_w, int h, int w) {
  const int fh = f.dim(0), fw = f.dim(1), c = f.dim(2);
  std::vector<float> mag(static_cast<std::size_t>(fh) * fw);
  for (int p = 0; p < fh * fw; ++p) {
    double s = 0;
    for (int ch = 0; ch < c; ++ch) s += double(f[static_cast<std::size_t>(p) * c + ch]) * f[static_cast<std::size_t>(p) * c + ch];
    mag[p] = static_cast<float>(std::sqrt(s));
  }
  Tensor<float> up = bilinear_resize(Tensor<float>::from({fh, fw, 1}, std::move(mag)), padded_h, padded_w);
  std::vector<double> crop_v(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) crop_v[static_cast<std::size_t>(y) * w + x] = up[static_cast<std::size_t>(y) * padded_w + x];
  }
  return Image8{h, w, 1, min_max_bytes(crop_v)};
}

std::vector<TrainSample<float>> load_split(const DatasetSpec& spec, const std::string& split, int ignore_index,
                                           int verbosity, std::ostream& err) {
  std::vector<std::pair<fs::path, fs::path>> items;
  for (const auto& stem : spec.split(split)) items.emplace_back(spec.image_path(split, stem), spec.mask_path(split, stem));
  PairPrefetcher pf(spec, items);
  std::vector<TrainSample<float>> out;
  int warnings = 0;
  while (auto pair = pf.next()) {
    warnings += pair->warnings;
    for (auto& l : pair->mask.labels) {
      if (l == spec.ignore_index) l = ignore_index;
    }
    out.push_back({std::move(pair->image), std::move(pair->mask.labels)});
  }
  if (warnings > 0 && verbosity >= 0) err << "warning: " << warnings << " off-palette mask pixels mapped to ignore\n";
  return out;
}

void check_classes(const F2NetConfig& cfg, const DatasetSpec& spec) {
  if (cfg.num_classes != spec.num_classes) {
    throw ConfigError("config num_classes " + std::to_string(cfg.num_classes) + " does not match dataset num_classes " +
                      std::to_string(spec.num_classes));
  }
}

int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
  SyntheticAudit audit;
  const DatasetSpec spec = gen_synthetic(o.out, o.seed, o.count, o.size, o.classes, &audit);
  write_resolved(fs::path(o.out) / "gen-data",
                 json{{"seed", o.seed}, {"count", o.count}, {"size", o.size}, {"classes", o.classes}});
  out << "wrote " << spec.train.size() << " train, " << spec.val.size() << " val, " << spec.test.size()
      << " test pairs to " << o.out << "\n";
  out << "max relative texture mean deviation " << audit.max_mean_deviation << "\n";
  return kExitOk;
}

int cmd_decompose(const DecomposeOptions& o, const GlobalOptions& g, std::ostream& out) {
  require_file(o.image, "--image");
  F2NetConfig cfg;
  if (!o.ckpt.empty()) {
    require_file(o.ckpt, "--ckpt");
    cfg = resolve_from_checkpoint(o.ckpt, g);
  } else {
    cfg = resolve_config(o.config, g);
  }
  F2Net<float> model(cfg);
  if (!o.ckpt.empty()) load_checkpoint(o.ckpt, model);

  const Tensor<float> image = image_to_tensor(read_png(o.image));
  NoGradGuard ng;
  const auto& afd = model.decomposer();
  const Tensor<float> x = afd.stem(image);
  const FrequencyPair<float> fp = afd.decompose(x);
  double max_err = 0, sum_err = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double e = std::abs(double(fp.lf[i]) + fp.hf[i] - x[i]);
    max_err = std::max(max_err, e);
    sum_err += e;
  }

  const fs::path dir(o.out);
  fs::create_directories(dir);
  const std::string stem = fs::path(o.image).stem().string();
  write_png(dir / (stem + "_lf.png"), channel_mosaic(fp.lf));
  write_png(dir / (stem + "_hf.png"), channel_mosaic(fp.hf));
  {
    std::ofstream os(dir / (stem + "_decompose.txt"));
    os << std::setprecision(9) << "image " << o.image << "\n"
       << "shape " << shape_str(x.shape()) << "\n"
       << "max_abs_reconstruction_error " << max_err << "\n"
       << "mean_abs_reconstruction_error " << sum_err / static_cast<double>(x.numel()) << "\n";
  }
  write_resolved(dir / stem, to_json(cfg));
  out << "max |lf + hf - x| = " << max_err << "\n";
  return kExitOk;
}

int cmd_train(const TrainOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  if (!fs::is_regular_file(fs::path(o.data) / "manifest.json")) {
    throw UsageError("--data: no manifest.json under '" + o.data + "'");
  }
  F2NetConfig cfg;
  if (!o.resume.empty()) {
    require_file(o.resume, "--resume");
    cfg = resolve_from_checkpoint(o.resume, g);
  } else {
    cfg = resolve_config(o.config, g);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.iters > 0) cfg.optim.total_iters = o.iters;
  cfg.validate();

  const DatasetSpec spec = read_manifest(o.data);
  check_classes(cfg, spec);
  const auto samples = load_split(spec, "train", cfg.ignore_index, g.verbosity, err);
  if (samples.empty()) throw std::runtime_error("training split of '" + o.data + "' is empty");

  F2Net<float> model(cfg);
  Trainer<float> trainer(model);
  if (!o.resume.empty()) trainer.restore(load_checkpoint(o.resume, model));

  ensure_parent(o.out_ckpt);
  std::ofstream log;
  if (!o.log.empty()) {
    ensure_parent(o.log);
    log.open(o.log);
    if (!log) throw std::runtime_error("cannot write '" + o.log + "'");
    log << loss_csv_header() << '\n';
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<TrainSample<float>> batch;
  LossReport last;
  while (trainer.iteration() < cfg.optim.total_iters) {
    batch.clear();
    for (std::size_t i : trainer.sample_indices(samples.size())) batch.push_back(samples[i]);
    last = trainer.step(batch);
    if (log.is_open()) log << loss_csv_row(last) << '\n';
    if (g.verbosity > 0 && (last.step % 50 == 0 || trainer.iteration() == cfg.optim.total_iters)) {
      err << "step " << last.step << " ce " << last.ce << " total " << last.total << "\n";
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_checkpoint(o.out_ckpt, model, trainer.state());
  write_resolved(o.out_ckpt, to_json(cfg));
  out << "trained " << trainer.iteration() << " iterations in " << std::fixed << std::setprecision(1) << secs
      << " s; final ce " << std::setprecision(4) << last.ce << "\n";
  return kExitOk;
}

int cmd_eval(const EvalOptions& o, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  require_file(o.ckpt, "--ckpt");
  if (!fs::is_regular_file(fs::path(o.data) / "manifest.json")) {
    throw UsageError("--data: no manifest.json under '" + o.data + "'");
  }
  if (o.split != "train" && o.split != "val" && o.split != "test") throw UsageError("--split: unknown split '" + o.split + "'");
  const F2NetConfig cfg = resolve_from_checkpoint(o.ckpt, g);
  const DatasetSpec spec = read_manifest(o.data);
  check_classes(cfg, spec);

  F2Net<float> model(cfg);
  load_checkpoint(o.ckpt, model);
  const auto samples = load_split(spec, o.split, cfg.ignore_index, g.verbosity, err);
  if (samples.empty()) throw std::runtime_error("split '" + o.split + "' of '" + o.data + "' is empty");

  ConfusionMatrix cm(cfg.num_classes);
  for (const auto& s : samples) {
    const SegmentationMap pred = predict(model, s.image, o.tile, o.overlap);
    SegmentationMap gt{s.image.dim(0), s.image.dim(1), s.labels, {}};
    cm.accumulate(pred, gt, cfg.ignore_index);
  }
  json report = metrics_report(cm, spec.class_names);
  report["split"] = o.split;
  report["images"] = samples.size();
  report["checkpoint"] = o.ckpt;

  ensure_parent(o.report);
  std::ofstream os(o.report);
  if (!os) throw std::runtime_error("cannot write '" + o.report + "'");
  os << report.dump(2) << '\n';
  os.close();
  write_resolved(o.report, to_json(cfg));
  out << std::fixed << std::setprecision(4) << "mIoU " << report["miou"].get<double>() << "  F1 "
      << report["f1"].get<double>() << "  accuracy " << report["accuracy"].get<double>() << "  (" << o.split << ", "
      << samples.size() << " images)\n";
  return kExitOk;
}

int cmd_predict(const PredictOptions& o, const GlobalOptions& g, std::ostream& out) {
  require_file(o.image, "--image");
  require_file(o.ckpt, "--ckpt");
  const F2NetConfig cfg = resolve_from_checkpoint(o.ckpt, g);
  F2Net<float> model(cfg);
  load_checkpoint(o.ckpt, model);
  DatasetSpec spec = o.data.empty() ? default_dataset_spec(cfg.num_classes) : read_manifest(o.data);
  check_classes(cfg, spec);

  const Tensor<float> image = image_to_tensor(read_png(o.image));
  const SegmentationMap seg = predict(model, image, o.tile, o.overlap);
  ensure_parent(o.out);
  write_mask(o.out, seg, spec);
  write_resolved(o.out, to_json(cfg));

  if (o.heatmaps) {
    NoGradGuard ng;
    const ForwardOutputs<float> fo = model.forward(image);
    const int ph = fo.stem.dim(0), pw = fo.stem.dim(1), h = image.dim(0), w = image.dim(1);
    fs::path base = fs::path(o.out);
    base.replace_extension();
    const std::pair<const char*, const Tensor<float>*> maps[] = {{"highfreq", &fo.branches.f_m},
                                                                 {"shortrange", &fo.branches.f_s},
                                                                 {"longrange", &fo.branches.f_l},
                                                                 {"lowfreq", &fo.branches.f_sl}};
    for (const auto& [name, t] : maps) {
      if (!t->defined()) continue;
      write_png(base.string() + "_heat_" + name + ".png", magnitude_heatmap(*t, ph, pw, h, w));
    }
  }
  std::vector<long> counts(cfg.num_classes, 0);
  for (int l : seg.labels) ++counts[l];
  out << "wrote " << o.out << " (" << seg.height << "x" << seg.width << "); class pixels";
  for (long c : counts) out << ' ' << c;
  out << "\n";
  return kExitOk;
}

int cmd_gradcheck(const GradcheckOptions& o, const GlobalOptions& g, std::ostream& out) {
  const F2NetConfig cfg = o.config.empty() && g.overrides.empty() ? toy_config() : resolve_config(o.config, g);
  std::map<std::string, double> worst;
  for (int s = 0; s < o.seeds; ++s) {
    for (const auto& e : run_grad_suite(cfg, o.seed + s, o.module, o.samples)) {
      double& w = worst[e.module];
      w = std::max(w, e.max_rel_error);
      if (g.verbosity > 0) out << "  " << e.module << '/' << e.name << ' ' << e.max_rel_error << "\n";
    }
  }
  constexpr double kTolerance = 1e-4;
  bool ok = true;
  for (const auto& m : grad_suite_modules()) {
    auto it = worst.find(m);
    if (it == worst.end()) continue;
    const bool pass = it->second < kTolerance;
    ok = ok && pass;
    out << std::left << std::setw(14) << m << std::scientific << std::setprecision(3) << it->second
        << (pass ? "  ok" : "  FAIL") << "\n";
  }
  return ok ? kExitOk : kExitRuntime;
}

int cmd_selftest(std::ostream& out) {
  const SelftestReport r = run_selftest(&out);
  out << r.passed << " passed, " << r.failures.size() << " failed\n";
  return r.ok() ? kExitOk : kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"F2Net frequency-aware segmentation", "f2net"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--threads", g.threads, "Kernel worker threads (falls back to F2NET_THREADS, then 1)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("-v,--verbose", g.verbosity, "More progress output");
  app.add_option("--set", g.overrides, "Config override key.path=value (repeatable)");

  GenDataOptions gen;
  auto* c_gen = app.add_subcommand("gen-data", "Write a synthetic frequency-probe dataset");
  c_gen->add_option("--seed", gen.seed);
  c_gen->add_option("--count", gen.count)->check(CLI::PositiveNumber);
  c_gen->add_option("--size", gen.size);
  c_gen->add_option("--classes", gen.classes);
  c_gen->add_option("--out", gen.out)->required();

  DecomposeOptions dec;
  auto* c_dec = app.add_subcommand("decompose", "Export low/high-frequency maps of one image");
  c_dec->add_option("--image", dec.image)->required();
  c_dec->add_option("--config", dec.config);
  c_dec->add_option("--ckpt", dec.ckpt, "Use trained weights instead of a seeded initialisation");
  c_dec->add_option("--out", dec.out, "Output directory")->required();

  TrainOptions tr;
  auto* c_train = app.add_subcommand("train", "Train on a dataset directory");
  c_train->add_option("--data", tr.data)->required();
  c_train->add_option("--config", tr.config);
  c_train->add_option("--iters", tr.iters, "Overrides optim.total_iters")->check(CLI::PositiveNumber);
  c_train->add_option("--out-ckpt", tr.out_ckpt)->required();
  c_train->add_option("--log", tr.log, "CSV loss log");
  c_train->add_option("--seed", tr.seed);
  c_train->add_option("--resume", tr.resume, "Continue from a checkpoint");

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  c_eval->add_option("--data", ev.data)->required();
  c_eval->add_option("--ckpt", ev.ckpt)->required();
  c_eval->add_option("--report", ev.report)->required();
  c_eval->add_option("--split", ev.split);
  c_eval->add_option("--tile", ev.tile)->check(CLI::NonNegativeNumber);
  c_eval->add_option("--overlap", ev.overlap)->check(CLI::NonNegativeNumber);

  PredictOptions pr;
  auto* c_pred = app.add_subcommand("predict", "Segment one image");
  c_pred->add_option("--image", pr.image)->required();
  c_pred->add_option("--ckpt", pr.ckpt)->required();
  c_pred->add_option("--tile", pr.tile)->check(CLI::NonNegativeNumber);
  c_pred->add_option("--overlap", pr.overlap)->check(CLI::NonNegativeNumber);
  c_pred->add_option("--out", pr.out, "Palette PNG")->required();
  c_pred->add_option("--data", pr.data, "Take the palette from this dataset's manifest");
  c_pred->add_flag("--heatmaps", pr.heatmaps, "Also write per-branch feature-magnitude maps");

  GradcheckOptions gc;
  auto* c_grad = app.add_subcommand("gradcheck", "64-bit finite-difference gradient suite");
  c_grad->add_option("--config", gc.config);
  c_grad->add_option("--module", gc.module);
  c_grad->add_option("--seed", gc.seed);
  c_grad->add_option("--seeds", gc.seeds)->check(CLI::PositiveNumber);
  c_grad->add_option("--samples", gc.samples, "Probed components per model tensor")->check(CLI::PositiveNumber);

  auto* c_self = app.add_subcommand("selftest", "Run the built-in closed-form cases");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    set_num_threads(resolve_thread_count(g.threads));
    if (c_gen->parsed()) return cmd_gen_data(gen, out);
    if (c_dec->parsed()) return cmd_decompose(dec, g, out);
    if (c_train->parsed()) return cmd_train(tr, g, out, err);
    if (c_eval->parsed()) return cmd_eval(ev, g, out, err);
    if (c_pred->parsed()) return cmd_predict(pr, g, out);
    if (c_grad->parsed()) return cmd_gradcheck(gc, g, out);
    if (c_self->parsed()) return cmd_selftest(out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace f2net
