// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Euler integration of the learned velocity field from noise (t = 1) to data
// (t = 0) with classifier-free guidance on the text prompt.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vace/codec.hpp"
#include "vace/model.hpp"
#include "vace/vcu.hpp"

namespace vace {

struct SampleConfig {
  std::int64_t steps = 40;
  double guide = 3.0;
  std::uint64_t seed = 0;
  /// Copy the source pixels back wherever the (video) mask is 0.
  bool composite_inactive = false;
  /// Warp the uniform time grid with t -> s t / (1 + (s - 1) t).
  bool shift_grid = false;
  double shift = 3.0;

  void check() const;
};

/// Velocity over the whole latent (references included) for the given text ids.
using VelocityFn =
    std::function<LatentGrid(const LatentGrid& x, float t, const std::vector<std::int64_t>& text_ids)>;

/// The model as a velocity field; the context rows are built once.
VelocityFn model_velocity(const ParamStore& params, const ModelConfig& cfg, const LatentBundle& bundle);

/// Time grid t_0 = 1 > t_1 > ... > t_K = 0.
std::vector<double> time_grid(const SampleConfig& sc);

/// K Euler steps x <- x - (t_k - t_{k+1}) v. Guidance g: v = v_u + g (v_c - v_u);
/// g == 1 evaluates only the conditional branch and g == 0 only the unconditional one.
LatentGrid euler_integrate(const VelocityFn& velocity, LatentGrid x, const std::vector<std::int64_t>& cond_ids,
                           const std::vector<std::int64_t>& uncond_ids, const SampleConfig& sc);

/// Standard normal latent of the Vcu's full (references + video) shape. Depends
/// only on the seed and the shape: the stream is derive_seed(seed, fnv1a64("noise" + shape)).
LatentGrid seeded_noise_for(const Vcu& vcu, const ModelConfig& cfg, std::uint64_t seed);

/// Generated video of length vcu.video_len, clamped to [-1, 1].
FrameSeq euler_sample(const ParamStore& params, const ModelConfig& cfg, const Vcu& vcu, const SampleConfig& sc);

/// Same, with an arbitrary velocity field (used with stub models in tests).
FrameSeq euler_sample(const VelocityFn& velocity, const ModelConfig& cfg, const Vcu& vcu, const SampleConfig& sc);

}  // namespace vace
