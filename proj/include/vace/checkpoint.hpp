// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint directory layout:
//   manifest.json        format version, configs, step, rng state, and per
//                        parameter: name, shape, trainable flag, file
//   tensors/<name>.f32   raw little-endian 32-bit floats, row-major

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "vace/model.hpp"
#include "vace/rng.hpp"
#include "vace/train.hpp"

namespace vace {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ParamStore params;
  std::int64_t step = 0;
  Rng rng;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

/// Throws IoError if the directory or a buffer is missing, IncompatibleVersionError
/// on a version mismatch, ParseError (naming the parameter) on bad buffers or a
/// manifest that disagrees with the buffers on disk.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace vace
