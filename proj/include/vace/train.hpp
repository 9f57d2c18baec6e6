// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Rectified-flow training: x_t = (1 - t) x0 + t eps, target velocity eps - x0,
// t drawn uniformly and then shifted toward the noisy end.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "vace/datagen.hpp"
#include "vace/model.hpp"
#include "vace/rng.hpp"

namespace vace {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t steps = 2000;
  std::int64_t batch_size = 4;
  double p_zero = 0.1;  // probability of training on the empty prompt
  double shift = 3.0;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 0;  // 0: evaluate at the start and end only
  double clip_norm = 0.0;       // global gradient norm cap; 0 disables
  bool skip_invalid = false;    // skip (and report) invalid samples instead of failing

  void check() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// t = s u / (1 + (s - 1) u) for u in (0, 1).
double shift_time(double u, double s);

struct FlowPair {
  Tensor x_t;
  Tensor v_target;
};

FlowPair flow_pair(const Tensor& x0, const Tensor& noise, float t);

struct LossRecord {
  std::int64_t step = 0;
  TaskTag task;
  double loss = 0.0;
};

/// "step<TAB>task<TAB>loss" with the loss to 6 significant digits.
std::string format_loss_record(const LossRecord& r);

struct AdamMoments {
  std::vector<float> m, v;
};

struct TrainState {
  ParamStore params;
  std::map<std::string, AdamMoments> moments;  // exactly the trainable parameters
  std::int64_t step = 0;
  Rng rng;
  std::vector<LossRecord> log;
  std::vector<std::string> skipped;  // one line per skipped sample

  /// Zero moments for every trainable tensor; rng = Rng(seed).
  static TrainState start(ParamStore params, std::uint64_t seed);
};

/// Codec-side view of a sample: context latents, clean latent and text ids.
struct PreparedSample {
  LatentBundle bundle;
  LatentGrid x0;
  std::vector<std::int64_t> text_ids;
  std::vector<std::int64_t> empty_text_ids;
  TaskTag task;
};

/// Throws if the Vcu is invalid or does not fit the codec strides.
PreparedSample prepare_sample(const TrainSample& sample, const ModelConfig& cfg);

/// One optimizer step on `batch`. Returns the mean loss over the samples used.
double train_step(TrainState& state, const ModelConfig& cfg, const TrainConfig& tc,
                  const std::vector<TrainSample>& batch);
double train_step(TrainState& state, const ModelConfig& cfg, const TrainConfig& tc,
                  const std::vector<const PreparedSample*>& batch);

/// Fixed validation probes. The noise of probe j of a sample is
/// normal(Rng(derive_seed(sample seed, kProbeStream)).split(j), x0 shape).
inline constexpr std::array<float, 3> kProbeTimes = {0.25f, 0.5f, 0.75f};
inline constexpr std::uint64_t kProbeStream = 0x76616c;  // "val"

/// Mean flow-matching loss over the probe times with noise fixed by the
/// sample seed, so repeated evaluations agree exactly.
double validation_loss(const ParamStore& params, const ModelConfig& cfg, const PreparedSample& sample,
                       std::uint64_t sample_seed);

struct EvalPoint {
  std::int64_t step = 0;
  double mean_loss = 0.0;
  std::map<std::string, double> per_task;  // keyed by sample task name
};

struct FitResult {
  TrainState state;
  std::vector<EvalPoint> evals;
  /// Digest of the training records and of the drawn (index, noise, time, drop)
  /// stream; independent of model configuration.
  std::string data_digest;
};

/// Trains for tc.steps from `init`. Batches are drawn with replacement from
/// `train`; `val` is evaluated at step 0, every eval_every steps and at the end.
FitResult fit(const ModelConfig& cfg, const TrainConfig& tc, ParamStore init, const std::vector<TrainSample>& train,
              const std::vector<TrainSample>& val);

/// Per-task mean validation loss.
EvalPoint evaluate_loss(const ParamStore& params, const ModelConfig& cfg, const std::vector<TrainSample>& val,
                        std::int64_t step = 0);

/// Incremental FNV-1a 64 hash.
class Digest {
 public:
  void update(const void* data, std::size_t size);
  void update_u64(std::uint64_t v);
  std::uint64_t value() const { return h_; }
  std::string hex() const;

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace vace
