// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vace/datagen.hpp"
#include "vace/model.hpp"
#include "vace/sampler.hpp"

namespace vace {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(4 / mse) over video pixels whose mask is 0, comparing `output` with
/// the Vcu's source frames (signal range 2). Capped at 99 dB; NaN when the
/// video part has no inactive pixel.
double psnr_inactive(const FrameSeq& output, const Vcu& vcu);

/// Mean |frame_t - frame_{t-1}| over all pixels and channels; 0 for one frame.
double flicker(const FrameSeq& video);

struct EvalOptions {
  SampleConfig sampler;
  /// Outputs are sampled for the first this-many validation samples of each task.
  std::int64_t samples_per_task = 4;
};

struct TaskLoss {
  std::string task;
  std::int64_t count = 0;
  double loss = 0.0;
};

struct EvalReport {
  std::vector<TaskLoss> tasks;  // sorted by task name, one entry per task present
  double psnr_inactive = 0.0;   // mean over sampled MV2V outputs
  std::int64_t psnr_count = 0;
  double flicker = 0.0;  // mean over all sampled outputs
  std::int64_t sampled = 0;
  std::string config_digest;

  /// Tab-separated rows "section<TAB>key<TAB>count<TAB>value" with sections
  /// loss, psnr_inactive, flicker and digest, in that order.
  std::string tsv() const;
  std::string summary() const;
};

/// Deterministic in (params, cfg, val, options): probe noise is fixed per
/// sample, and sampler seeds are derive_seed(options.sampler.seed, sample seed).
EvalReport evaluate(const ParamStore& params, const ModelConfig& cfg, const std::vector<TrainSample>& val,
                    const EvalOptions& options = {});

}  // namespace vace
