// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Ablation grid: every arm of an axis trains from the same backbone on the
// same data stream, so arms differ only in the axis under study.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vace/datagen.hpp"
#include "vace/model.hpp"
#include "vace/train.hpp"

namespace vace {

enum class AblationAxis { structure, placement, decouple, shift, pzero };

const char* axis_name(AblationAxis axis);
AblationAxis parse_axis(const std::string& name);

struct Arm {
  std::string name;
  ModelConfig model;
  TrainConfig train;
};

/// structure: fullft, adapter; placement: continuous_first(k) and
/// distributed_even(k) for k in {L/4, L/2, L}; decouple: on, off;
/// shift: s in {1, 3}; pzero: {0, 0.1, 0.3}.
std::vector<Arm> ablation_arms(AblationAxis axis, const ModelConfig& model, const TrainConfig& train);

/// Training recipe of the text-to-video backbone that adapter and fullft arms
/// start from (the adapter cannot change the output of an untrained backbone,
/// whose final projection is zero).
struct BackboneRecipe {
  std::int64_t samples = 1000;
  std::int64_t steps = 1000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 20260101;
};

/// Base-mode model trained on generated t2v samples with `cfg`'s geometry.
ParamStore pretrain_backbone(const ModelConfig& cfg, const BackboneRecipe& recipe, const Geometry& geo = {});

struct ArmRun {
  std::string arm;
  std::uint64_t seed = 0;
  std::vector<EvalPoint> curve;
  std::vector<double> train_curve;  // mean batch loss per step
  std::string data_digest;
  double final_loss() const { return curve.empty() ? 0.0 : curve.back().mean_loss; }
};

struct AblationReport {
  AblationAxis axis = AblationAxis::structure;
  std::vector<std::string> arms;  // in grid order
  std::vector<ArmRun> runs;       // arm-major, then seed
  bool digests_match = true;      // within each seed, across arms
  std::string note;

  double median_final(const std::string& arm) const;
  /// "arm<TAB>seed<TAB>step<TAB>task<TAB>loss" rows: every eval point, one
  /// row per task plus a "mean" row, followed by "arm<TAB>median<TAB>-<TAB>mean<TAB>loss".
  std::string tsv() const;
  std::string summary() const;
};

/// Runs every arm for every seed (seed = the training stream seed).
AblationReport run_ablation(AblationAxis axis, const std::vector<std::uint64_t>& seeds, const ModelConfig& model,
                            const TrainConfig& train, const ParamStore& backbone,
                            const std::vector<TrainSample>& train_set, const std::vector<TrainSample>& val_set);

/// Median of a non-empty list (mean of the middle pair for even sizes).
double median(std::vector<double> v);

}  // namespace vace
