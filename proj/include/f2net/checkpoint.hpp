// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The F2Net Authors
//
// Binary checkpoint layout:
//   "F2NETCKP" | u32 version | u64 header bytes | JSON header | float32 blobs
// All integers and floats are little-endian. The header carries the config,
// a tensor directory (name, shape, dtype, byte offset into the blob area),
// the iteration counter, the sampling RNG state and the branch weights.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "f2net/model.hpp"

namespace f2net {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing magic, truncated data, or an unparsable header.
class CheckpointCorruptError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointVersionError : public CheckpointError {
 public:
  CheckpointVersionError(std::uint32_t found, const std::string& what)
      : CheckpointError(what), found_(found) {}
  std::uint32_t found() const { return found_; }

 private:
  std::uint32_t found_;
};

/// The stored tensors do not fit the model built from the current config.
class CheckpointShapeError : public CheckpointError {
 public:
  CheckpointShapeError(std::string path, const std::string& what)
      : CheckpointError(what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Values are stored as float32; double models round on save.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const F2Net<T>& model, const TrainingState& state = {});

/// Header only; enough to rebuild a model of the right shape.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);
F2NetConfig checkpoint_config(const std::filesystem::path& path);

/// Overwrites every parameter and momentum buffer of `model`. Nothing is
/// modified unless the whole file validates.
template <typename T>
TrainingState load_checkpoint(const std::filesystem::path& path, F2Net<T>& model);

}  // namespace f2net
