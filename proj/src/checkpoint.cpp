// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors

#include "f2net/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

namespace f2net {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'F', '2', 'N', 'E', 'T', 'C', 'K', 'P'};
constexpr std::size_t kPreamble = 8 + 4 + 8;
const std::string kMomentumSuffix = "@momentum";

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::string& in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

template <typename T, typename Range>
void put_floats(std::string& out, const Range& values) {
  for (T v : values) put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Parsed {
  nlohmann::json header;
  std::string bytes;
  std::size_t blob_start = 0;
};

Parsed parse(const fs::path& path) {
  Parsed p;
  p.bytes = read_all(path);
  const std::string where = "checkpoint " + path.string();
  if (p.bytes.size() < kPreamble || std::memcmp(p.bytes.data(), kMagic, 8) != 0) {
    throw CheckpointCorruptError(where + " is not an F2Net checkpoint (bad magic or truncated preamble)");
  }
  const auto version = get_le<std::uint32_t>(p.bytes, 8);
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError(version, where + " has format version " + std::to_string(version) +
                                              ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = get_le<std::uint64_t>(p.bytes, 12);
  if (header_len > p.bytes.size() - kPreamble) throw CheckpointCorruptError(where + " is truncated inside its header");
  try {
    p.header = nlohmann::json::parse(p.bytes.begin() + kPreamble, p.bytes.begin() + kPreamble + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointCorruptError(where + " has an unreadable header: " + e.what());
  }
  p.blob_start = kPreamble + header_len;
  std::uint64_t blob_bytes = 0;
  try {
    blob_bytes = p.header.at("blob_bytes").get<std::uint64_t>();
    (void)p.header.at("tensors").size();
    (void)p.header.at("config");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointCorruptError(where + " header is incomplete: " + e.what());
  }
  if (p.bytes.size() - p.blob_start != blob_bytes) {
    throw CheckpointCorruptError(where + " is truncated: expected " + std::to_string(blob_bytes) +
                                 " tensor bytes, found " + std::to_string(p.bytes.size() - p.blob_start));
  }
  return p;
}

}  // namespace

template <typename T>
void save_checkpoint(const fs::path& path, const F2Net<T>& model, const TrainingState& state) {
  nlohmann::json header;
  header["config"] = to_json(model.config());
  header["iteration"] = state.iteration;
  header["rng_state"] = state.rng_state;
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [tag, w] : state.balance_weights) weights[std::string(to_string(tag))] = w;
  header["balance_weights"] = weights;

  std::string blobs;
  nlohmann::json dir = nlohmann::json::array();
  auto add = [&](const std::string& name, const Shape& shape, const auto& values) {
    dir.push_back({{"name", name}, {"shape", shape}, {"dtype", "float32"}, {"offset", blobs.size()}});
    put_floats<T>(blobs, values);
  };
  for (const auto& p : model.params().params()) {
    add(p.path, p.value.shape(), p.value.data());
    if (!p.momentum.empty()) add(p.path + kMomentumSuffix, p.value.shape(), p.momentum);
  }
  header["tensors"] = dir;
  header["blob_bytes"] = blobs.size();

  const std::string h = header.dump();
  std::string out(kMagic, 8);
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint64_t>(h.size()));
  out += h;
  out += blobs;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("failed writing checkpoint " + path.string());
}

nlohmann::json read_checkpoint_header(const fs::path& path) { return parse(path).header; }

F2NetConfig checkpoint_config(const fs::path& path) {
  const auto header = read_checkpoint_header(path);
  try {
    return config_from_json(header.at("config"));
  } catch (const ConfigError& e) {
    throw CheckpointCorruptError("checkpoint " + path.string() + " carries an invalid config: " + e.what());
  }
}

template <typename T>
TrainingState load_checkpoint(const fs::path& path, F2Net<T>& model) {
  const Parsed p = parse(path);
  struct Entry {
    Shape shape;
    std::size_t offset;
  };
  std::map<std::string, Entry> dir;
  const std::size_t blob_bytes = p.bytes.size() - p.blob_start;
  try {
    for (const auto& t : p.header.at("tensors")) {
      Entry e{t.at("shape").get<Shape>(), t.at("offset").get<std::size_t>()};
      if (t.at("dtype").get<std::string>() != "float32") {
        throw CheckpointCorruptError("unsupported dtype for " + t.at("name").get<std::string>());
      }
      if (e.offset + shape_numel(e.shape) * 4 > blob_bytes) {
        throw CheckpointCorruptError("tensor " + t.at("name").get<std::string>() + " runs past the end of the file");
      }
      dir.emplace(t.at("name").get<std::string>(), std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointCorruptError("checkpoint " + path.string() + " has a malformed tensor directory: " + e.what());
  }

  std::set<std::string> used;
  for (const auto& prm : model.params().params()) {
    auto it = dir.find(prm.path);
    if (it == dir.end()) {
      throw CheckpointShapeError(prm.path, "checkpoint has no tensor '" + prm.path + "' required by the config");
    }
    if (it->second.shape != prm.value.shape()) {
      throw CheckpointShapeError(prm.path, "tensor '" + prm.path + "' is " + shape_str(it->second.shape) +
                                               " in the checkpoint but " + shape_str(prm.value.shape()) +
                                               " under the config");
    }
    used.insert(prm.path);
    if (dir.count(prm.path + kMomentumSuffix)) used.insert(prm.path + kMomentumSuffix);
  }
  for (const auto& [name, e] : dir) {
    if (!used.count(name)) throw CheckpointShapeError(name, "checkpoint tensor '" + name + "' has no place in the config");
  }

  auto read = [&](const Entry& e, std::span<T> dst) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<T>(std::bit_cast<float>(get_le<std::uint32_t>(p.bytes, p.blob_start + e.offset + 4 * i)));
    }
  };
  for (auto& prm : model.params().params()) {
    read(dir.at(prm.path), prm.value.mutable_data());
    if (auto m = dir.find(prm.path + kMomentumSuffix); m != dir.end()) {
      prm.momentum.resize(prm.value.numel());
      read(m->second, prm.momentum);
    } else {
      prm.momentum.clear();
    }
  }

  TrainingState s;
  s.iteration = p.header.value("iteration", 0L);
  s.rng_state = p.header.value("rng_state", std::string());
  const nlohmann::json weights = p.header.value("balance_weights", nlohmann::json::object());
  for (const auto& [name, w] : weights.items()) {
    if (auto tag = parse_branch_tag(name)) s.balance_weights[*tag] = w.template get<double>();
  }
  return s;
}

template void save_checkpoint(const fs::path&, const F2Net<float>&, const TrainingState&);
template void save_checkpoint(const fs::path&, const F2Net<double>&, const TrainingState&);
template TrainingState load_checkpoint(const fs::path&, F2Net<float>&);
template TrainingState load_checkpoint(const fs::path&, F2Net<double>&);

}  // namespace f2net
