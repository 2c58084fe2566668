// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

#include "f2net/tensor.hpp"

namespace f2net {

using nlohmann::json;

namespace {

std::string field(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

[[noreturn]] void type_error(const std::string& path, const char* expected, const json& got) {
  throw ConfigError("config field '" + path + "' expects " + expected + ", got " + got.dump());
}

void read(const json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) type_error(path, "an integer", j);
  out = j.get<int>();
}

void read(const json& j, const std::string& path, std::uint64_t& out) {
  if (!j.is_number_integer() || j.get<long long>() < 0) type_error(path, "a non-negative integer", j);
  out = j.get<std::uint64_t>();
}

void read(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) type_error(path, "a number", j);
  out = j.get<double>();
}

void read(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) type_error(path, "a boolean", j);
  out = j.get<bool>();
}

void read(const json& j, const std::string& path, std::vector<int>& out) {
  if (!j.is_array()) type_error(path, "an array of integers", j);
  out.clear();
  for (const auto& e : j) {
    if (!e.is_number_integer()) type_error(path, "an array of integers", j);
    out.push_back(e.get<int>());
  }
}

void read(const json& j, const std::string& path, HighpassMode& out) {
  if (!j.is_string()) type_error(path, "\"identity\" or \"all_ones\"", j);
  const auto s = j.get<std::string>();
  if (s == "identity") out = HighpassMode::Identity;
  else if (s == "all_ones") out = HighpassMode::AllOnes;
  else type_error(path, "\"identity\" or \"all_ones\"", j);
}

using Binder = std::map<std::string, std::function<void(const json&, const std::string&)>>;

template <typename V>
std::pair<const std::string, std::function<void(const json&, const std::string&)>> bind(
    const char* key, V& target) {
  return {key, [&target](const json& j, const std::string& path) { read(j, path, target); }};
}

void apply(const json& j, const std::string& prefix, const Binder& binder) {
  if (!j.is_object()) type_error(prefix.empty() ? "<root>" : prefix, "an object", j);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = field(prefix, it.key());
    auto b = binder.find(it.key());
    if (b == binder.end()) throw ConfigError("unknown config key '" + path + "'");
    b->second(it.value(), path);
  }
}

}  // namespace

void F2NetConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (in_channels < 1) fail("in_channels must be >= 1");
  if (num_classes < 2) fail("num_classes (" + std::to_string(num_classes) + ") must be >= 2");
  if (reference_size < 1) fail("reference_size must be >= 1");
  if (afd.embed_dim < 1) fail("afd.embed_dim must be >= 1");
  if (afd.groups < 1 || afd.embed_dim % afd.groups != 0) {
    fail("afd.groups (" + std::to_string(afd.groups) + ") must divide afd.embed_dim (" +
         std::to_string(afd.embed_dim) + ")");
  }
  if (afd.kernel_size < 1 || afd.kernel_size % 2 == 0) {
    fail("afd.kernel_size (" + std::to_string(afd.kernel_size) + ") must be odd");
  }
  const int f = afd.lf_downsample_factor;
  if (f != 1 && f != 2 && f != 4 && f != 8) {
    fail("afd.lf_downsample_factor (" + std::to_string(f) + ") must be one of 1, 2, 4, 8");
  }
  if (hf.num_stages < 1) fail("hf.num_stages must be >= 1");
  if (static_cast<int>(hf.stage_depths.size()) != hf.num_stages) {
    fail("hf.stage_depths has " + std::to_string(hf.stage_depths.size()) +
         " entries but hf.num_stages is " + std::to_string(hf.num_stages));
  }
  for (int d : hf.stage_depths) {
    if (d < 1) fail("hf.stage_depths entries must be >= 1");
  }
  if (hf.base_channels < 1) fail("hf.base_channels must be >= 1");
  if (hf.ffn_expansion < 1) fail("hf.ffn_expansion must be >= 1");
  if (lf.short_blocks < 0) fail("lf.short_blocks must be >= 0");
  if (lf.short_channels < 1) fail("lf.short_channels must be >= 1");
  if (lf.long_layers < 0) fail("lf.long_layers must be >= 0");
  if (lf.long_heads < 1 || lf.long_dim < 1 || lf.long_dim % lf.long_heads != 0) {
    fail("lf.long_heads (" + std::to_string(lf.long_heads) + ") must divide lf.long_dim (" +
         std::to_string(lf.long_dim) + ")");
  }
  if (lf.patch_size < 1) fail("lf.patch_size must be >= 1");
  if (fusion.squeeze_ratio < 1) fail("fusion.squeeze_ratio must be >= 1");
  if (fusion.cfal_channels < 0) fail("fusion.cfal_channels must be >= 0");
  if (loss.lambda1 < 0 || loss.lambda2 < 0 || loss.lambda3 < 0) {
    fail("loss.lambda1/lambda2/lambda3 must be non-negative");
  }
  if (loss.lambda1 + loss.lambda2 + loss.lambda3 <= 0) fail("at least one loss.lambda* must be positive");
  if (!(optim.lr0 >= 0)) fail("optim.lr0 must be non-negative");
  if (optim.momentum < 0 || optim.momentum >= 1) fail("optim.momentum must lie in [0, 1)");
  if (!(optim.poly_power > 0)) fail("optim.poly_power must be positive");
  if (optim.total_iters < 1) fail("optim.total_iters must be >= 1");
  if (optim.batch_size < 1) fail("optim.batch_size must be >= 1");
  if (optim.balance_rate < 0) fail("optim.balance_rate must be non-negative");
  if (!branches.highfreq && !branches.shortrange && !branches.longrange) {
    fail("branches: at least one of highfreq/shortrange/longrange must be enabled");
  }
}

int F2NetConfig::spatial_multiple() const {
  int m = 1;
  if (branches.highfreq) m = std::lcm(m, 1 << hf.num_stages);
  if (branches.shortrange) m = std::lcm(m, afd.lf_downsample_factor * 2);
  if (branches.longrange) m = std::lcm(m, afd.lf_downsample_factor * lf.patch_size);
  return m;
}

int F2NetConfig::min_side() const {
  int s = spatial_multiple();
  if (branches.highfreq) s = std::max(s, 1 << (hf.num_stages + 1));
  return s;
}

json to_json(const F2NetConfig& c) {
  return json{
      {"in_channels", c.in_channels},
      {"num_classes", c.num_classes},
      {"ignore_index", c.ignore_index},
      {"reference_size", c.reference_size},
      {"seed", c.seed},
      {"afd",
       {{"embed_dim", c.afd.embed_dim},
        {"groups", c.afd.groups},
        {"kernel_size", c.afd.kernel_size},
        {"lf_downsample_factor", c.afd.lf_downsample_factor},
        {"highpass_mode", c.afd.highpass_mode == HighpassMode::Identity ? "identity" : "all_ones"}}},
      {"hf",
       {{"stage_depths", c.hf.stage_depths},
        {"base_channels", c.hf.base_channels},
        {"num_stages", c.hf.num_stages},
        {"ssm_state_mixing", c.hf.ssm_state_mixing},
        {"ffn_expansion", c.hf.ffn_expansion}}},
      {"lf",
       {{"short_blocks", c.lf.short_blocks},
        {"short_channels", c.lf.short_channels},
        {"long_layers", c.lf.long_layers},
        {"long_heads", c.lf.long_heads},
        {"long_dim", c.lf.long_dim},
        {"patch_size", c.lf.patch_size}}},
      {"fusion", {{"squeeze_ratio", c.fusion.squeeze_ratio}, {"cfal_channels", c.fusion.cfal_channels}}},
      {"loss", {{"lambda1", c.loss.lambda1}, {"lambda2", c.loss.lambda2}, {"lambda3", c.loss.lambda3}}},
      {"optim",
       {{"lr0", c.optim.lr0},
        {"momentum", c.optim.momentum},
        {"poly_power", c.optim.poly_power},
        {"total_iters", c.optim.total_iters},
        {"batch_size", c.optim.batch_size},
        {"balance_rate", c.optim.balance_rate}}},
      {"branches",
       {{"highfreq", c.branches.highfreq},
        {"shortrange", c.branches.shortrange},
        {"longrange", c.branches.longrange}}},
  };
}

F2NetConfig config_from_json(const json& j) {
  F2NetConfig c;
  Binder afd{bind("embed_dim", c.afd.embed_dim), bind("groups", c.afd.groups),
             bind("kernel_size", c.afd.kernel_size),
             bind("lf_downsample_factor", c.afd.lf_downsample_factor),
             bind("highpass_mode", c.afd.highpass_mode)};
  Binder hf{bind("stage_depths", c.hf.stage_depths), bind("base_channels", c.hf.base_channels),
            bind("num_stages", c.hf.num_stages), bind("ssm_state_mixing", c.hf.ssm_state_mixing),
            bind("ffn_expansion", c.hf.ffn_expansion)};
  Binder lf{bind("short_blocks", c.lf.short_blocks), bind("short_channels", c.lf.short_channels),
            bind("long_layers", c.lf.long_layers), bind("long_heads", c.lf.long_heads),
            bind("long_dim", c.lf.long_dim), bind("patch_size", c.lf.patch_size)};
  Binder fusion{bind("squeeze_ratio", c.fusion.squeeze_ratio),
                bind("cfal_channels", c.fusion.cfal_channels)};
  Binder loss{bind("lambda1", c.loss.lambda1), bind("lambda2", c.loss.lambda2),
              bind("lambda3", c.loss.lambda3)};
  Binder optim{bind("lr0", c.optim.lr0),           bind("momentum", c.optim.momentum),
               bind("poly_power", c.optim.poly_power), bind("total_iters", c.optim.total_iters),
               bind("batch_size", c.optim.batch_size), bind("balance_rate", c.optim.balance_rate)};
  Binder branches{bind("highfreq", c.branches.highfreq), bind("shortrange", c.branches.shortrange),
                  bind("longrange", c.branches.longrange)};
  auto section = [](const Binder& b) {
    return [&b](const json& v, const std::string& path) { apply(v, path, b); };
  };
  Binder root{bind("in_channels", c.in_channels),
              bind("num_classes", c.num_classes),
              bind("ignore_index", c.ignore_index),
              bind("reference_size", c.reference_size),
              bind("seed", c.seed),
              {"afd", section(afd)},
              {"hf", section(hf)},
              {"lf", section(lf)},
              {"fusion", section(fusion)},
              {"loss", section(loss)},
              {"optim", section(optim)},
              {"branches", section(branches)}};
  apply(j, "", root);
  return c;
}

json apply_overrides(json base, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + ov + "' is not of the form key.path=value");
    }
    const std::string key = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &base;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->is_object()) *node = json::object();
      node = &(*node)[parts[i]];
    }
    if (!node->is_object()) *node = json::object();
    (*node)[parts.back()] = value;
  }
  return base;
}

F2NetConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
  }
  F2NetConfig c = config_from_json(apply_overrides(std::move(j), overrides));
  c.validate();
  return c;
}

F2NetConfig toy_config() {
  F2NetConfig c;
  c.num_classes = 3;
  c.reference_size = 64;
  c.afd.embed_dim = 8;
  c.afd.groups = 2;
  c.afd.kernel_size = 3;
  c.afd.lf_downsample_factor = 4;
  c.hf.num_stages = 1;
  c.hf.stage_depths = {1};
  c.hf.base_channels = 8;
  c.hf.ffn_expansion = 2;
  c.lf.short_blocks = 1;
  c.lf.short_channels = 16;
  c.lf.long_layers = 1;
  c.lf.long_heads = 2;
  c.lf.long_dim = 16;
  c.lf.patch_size = 2;
  c.optim.lr0 = 0.01;
  c.optim.total_iters = 500;
  return c;
}

}  // namespace f2net
