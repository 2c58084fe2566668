// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "f2net/checkpoint.hpp"
#include "f2net/cli.hpp"
#include "f2net/data_io.hpp"
#include "f2net/metrics.hpp"
#include "f2net/model.hpp"
#include "f2net/parallel.hpp"

namespace py = pybind11;
using namespace f2net;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

// JSON crosses the boundary as text; Python parses it with the json module.
F2NetConfig config_from_text(const std::string& text) {
  F2NetConfig cfg = config_from_json(nlohmann::json::parse(text));
  cfg.validate();
  return cfg;
}

Tensor<float> to_tensor(const FloatArray& a) {
  if (a.ndim() != 3) throw DimensionError("expected an [H, W, C] array");
  Shape shape{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))};
  return Tensor<float>::from(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor<float>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  FloatArray out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

IntArray labels_array(const SegmentationMap& m) {
  IntArray out({m.height, m.width});
  std::copy(m.labels.begin(), m.labels.end(), out.mutable_data());
  return out;
}

SegmentationMap to_map(const IntArray& a) {
  if (a.ndim() != 2) throw DimensionError("expected an [H, W] label array");
  return {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), std::vector<int>(a.data(), a.data() + a.size()), {}};
}

py::dict report_dict(const LossReport& r) {
  py::dict d;
  d["step"] = r.step;
  d["ce"] = r.ce;
  d["cfal"] = r.cfal;
  d["cfbl"] = r.cfbl;
  d["total"] = r.total;
  d["mean_grad_norm"] = r.mean_grad_norm;
  d["lr"] = r.lr;
  py::dict norms;
  for (auto [tag, g] : r.branch_grad_norms) norms[py::str(std::string(to_string(tag)))] = g;
  d["branch_grad_norms"] = norms;
  return d;
}

// Owns the model so the trainer's reference stays valid.
struct Session {
  explicit Session(const F2NetConfig& cfg) : model(cfg), trainer(model) {}
  F2Net<float> model;
  Trainer<float> trainer;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Frequency-aware segmentation network on CPU";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<MetricError>(m, "MetricError", PyExc_ArithmeticError);

  m.def("toy_config", [] { return to_json(toy_config()).dump(); }, "Small configuration as JSON text");
  m.def("default_config", [] { return to_json(F2NetConfig{}).dump(); }, "Default configuration as JSON text");
  m.def("resolve_config", [](const std::string& text) { return to_json(config_from_text(text)).dump(); },
        "Fill defaults and validate a JSON configuration");
  m.def("set_num_threads", &set_num_threads);

  py::class_<Session>(m, "Model")
      .def(py::init([](const std::string& text) { return std::make_unique<Session>(config_from_text(text)); }),
           py::arg("config_json"))
      .def_static("load", [](const std::string& path) {
        auto s = std::make_unique<Session>(checkpoint_config(path));
        s->trainer.restore(load_checkpoint(path, s->model));
        return s;
      })
      .def("save", [](const Session& s, const std::string& path) { save_checkpoint(path, s.model, s.trainer.state()); })
      .def_property_readonly("config", [](const Session& s) { return to_json(s.model.config()).dump(); })
      .def_property_readonly("num_parameters", [](const Session& s) { return s.model.params().numel(); })
      .def_property_readonly("iteration", [](const Session& s) { return s.trainer.iteration(); })
      .def("logits", [](const Session& s, const FloatArray& image, int tile, int overlap) {
        const Tensor<float> x = to_tensor(image);
        return to_array(tile > 0 ? predict_logits_tiled(s.model, x, tile, overlap) : predict_logits(s.model, x));
      }, py::arg("image"), py::arg("tile") = 0, py::arg("overlap") = 0)
      .def("predict", [](const Session& s, const FloatArray& image, int tile, int overlap) {
        return labels_array(predict(s.model, to_tensor(image), tile, overlap));
      }, py::arg("image"), py::arg("tile") = 0, py::arg("overlap") = 0)
      .def("decompose", [](const Session& s, const FloatArray& image) {
        NoGradGuard ng;
        const auto out = s.model.forward(to_tensor(image));
        return py::make_tuple(to_array(out.stem), to_array(out.frequency.lf), to_array(out.frequency.hf));
      }, "Stem features and their low/high-frequency parts on the padded grid")
      .def("train_step", [](Session& s, const std::vector<FloatArray>& images, const std::vector<IntArray>& labels) {
        if (images.size() != labels.size() || images.empty()) throw std::invalid_argument("need matching, non-empty batches");
        std::vector<TrainSample<float>> batch;
        for (std::size_t i = 0; i < images.size(); ++i) batch.push_back({to_tensor(images[i]), to_map(labels[i]).labels});
        return report_dict(s.trainer.step(batch));
      });

  m.def("gen_synthetic", [](const std::string& root, std::uint64_t seed, int count, int size, int classes) {
    SyntheticAudit audit;
    const DatasetSpec spec = gen_synthetic(root, seed, count, size, classes, &audit);
    return py::make_tuple(to_json(spec).dump(), audit.max_mean_deviation);
  });
  m.def("load_pair", [](const std::string& root, const std::string& split, const std::string& stem) {
    const DatasetSpec spec = read_manifest(root);
    LoadedPair p = load_pair(spec.image_path(split, stem), spec.mask_path(split, stem), spec);
    return py::make_tuple(to_array(p.image), labels_array(p.mask));
  });
  m.def("metrics", [](const IntArray& pred, const IntArray& gt, int classes, std::optional<int> ignore) {
    ConfusionMatrix cm(classes);
    cm.accumulate(to_map(pred), to_map(gt), ignore);
    return metrics_report(cm).dump();
  }, py::arg("pred"), py::arg("gt"), py::arg("num_classes"), py::arg("ignore_index") = py::none());
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, "Run a command-line invocation in-process; returns (exit code, stdout, stderr)");
}
