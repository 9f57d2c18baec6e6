// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Line-oriented run configuration:
//
//   # comment
//   layers = 8
//   placement = distributed:4
//   patch = 1,2,2
//
// Unknown keys and malformed values are errors that name the line.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vace/ablate.hpp"
#include "vace/datagen.hpp"
#include "vace/model.hpp"
#include "vace/sampler.hpp"
#include "vace/train.hpp"

namespace vace {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  Geometry geometry;
  SampleConfig sampler;
  /// Base-mode checkpoint to start from (adapter and fullft runs); empty means
  /// fresh parameters from init_seed.
  std::string init;
  std::uint64_t init_seed = 0;
  std::int64_t eval_samples_per_task = 4;
  BackboneRecipe backbone;
};

/// Parses config text on top of the defaults. Throws ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});

/// Reads and parses a file. A missing file is an IoError.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Every recognised key, in documentation order.
const std::vector<std::string>& config_keys();

}  // namespace vace
