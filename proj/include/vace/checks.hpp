// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Invariant and gradient checks shared by `vace check`, the acceptance
// binary and the unit tests.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vace/grad_check.hpp"
#include "vace/model.hpp"
#include "vace/rng.hpp"

namespace vace::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// L=2, D=16, 2 heads, patch (1,1,1), 8 text buckets, 4 text tokens.
ModelConfig tiny_config(ModelMode mode);

/// Adds N(0, scale^2) noise to every parameter so no path is dead.
template <typename T>
void jitter(BasicParamStore<T>& store, Rng& rng, double scale) {
  for (auto& [name, p] : store) {
    for (auto& v : p.value.data()) v += static_cast<T>(scale * rng.normal());
  }
}

/// Random context bundle: `frames` latent frames of which `refs` are references.
LatentBundle random_bundle(Rng& rng, const ModelConfig& cfg, std::int64_t frames, std::int64_t refs, std::int64_t h,
                           std::int64_t w);

/// Random model input over a (frames, h, w) latent grid.
ModelInput<float> random_input(Rng& rng, const ModelConfig& cfg, std::int64_t frames, std::int64_t refs,
                               std::int64_t h, std::int64_t w);

struct GradErrors {
  double f32 = 0.0;  // analytic gradient computed in float
  double f64 = 0.0;  // analytic gradient computed in double
};

/// Worst coordinate-wise relative error per trainable tensor. Central
/// differences run once on an extended-precision copy of the parameters, so
/// the oracle's own rounding stays far below either tolerance.
std::map<std::string, GradErrors> model_grad_errors(const ParamStore& params, const ModelConfig& cfg,
                                                    const ModelInput<float>& input, const Tensor& target, double eps);

CheckResult codec_roundtrip(std::uint64_t seed);
CheckResult vcu_algebra();
CheckResult decouple_partition(std::uint64_t seed);
CheckResult zero_init_identity(std::uint64_t seed);
CheckResult mask_neutrality(std::uint64_t seed);
CheckResult frozen_invariance(std::uint64_t seed, std::int64_t steps = 50);
CheckResult gradient_correctness(std::uint64_t seed);
CheckResult sampler_contracts(std::uint64_t seed);

/// Every check above, in that order.
std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace vace::checks
