// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "vace/errors.hpp"
#include "vace/rng.hpp"

namespace vace {

void SampleConfig::check() const {
  if (steps < 1) throw ConfigError("sampler: steps must be at least 1");
  if (!(guide >= 0.0)) throw ConfigError("sampler: guide scale must be non-negative");
  if (!(shift >= 1.0)) throw ConfigError("sampler: shift must be at least 1");
}

VelocityFn model_velocity(const ParamStore& params, const ModelConfig& cfg, const LatentBundle& bundle) {
  auto context = std::make_shared<const Tensor>(context_rows<float>(bundle, cfg));
  const auto refs = bundle.ref_latent_len;
  return [&params, cfg, context, refs](const LatentGrid& x, float t, const std::vector<std::int64_t>& ids) {
    ModelInput<float> in;
    in.grid = TokenGrid::of(x, refs, cfg);
    in.noisy = patch_rows<float>(x, cfg);
    in.context = *context;
    in.text_ids = ids;
    in.t = t;
    return unpatch_rows(forward(params, cfg, in), in.grid, cfg.codec.channels());
  };
}

std::vector<double> time_grid(const SampleConfig& sc) {
  sc.check();
  std::vector<double> t(static_cast<std::size_t>(sc.steps) + 1);
  for (std::int64_t k = 0; k <= sc.steps; ++k) {
    const double u = 1.0 - static_cast<double>(k) / static_cast<double>(sc.steps);
    t[static_cast<std::size_t>(k)] = sc.shift_grid ? sc.shift * u / (1.0 + (sc.shift - 1.0) * u) : u;
  }
  return t;
}

LatentGrid euler_integrate(const VelocityFn& velocity, LatentGrid x, const std::vector<std::int64_t>& cond_ids,
                           const std::vector<std::int64_t>& uncond_ids, const SampleConfig& sc) {
  const auto grid = time_grid(sc);
  const auto g = static_cast<float>(sc.guide);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const auto t = static_cast<float>(grid[k]);
    const auto dt = static_cast<float>(grid[k] - grid[k + 1]);
    LatentGrid v;
    if (sc.guide == 1.0) {
      v = velocity(x, t, cond_ids);
    } else if (sc.guide == 0.0) {
      v = velocity(x, t, uncond_ids);
    } else {
      v = velocity(x, t, uncond_ids);
      const auto vc = velocity(x, t, cond_ids);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += g * (vc[i] - v[i]);
    }
    if (v.shape() != x.shape()) ops::dim_error("euler_integrate", v.shape(), x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dt * v[i];
  }
  return x;
}

LatentGrid seeded_noise_for(const Vcu& vcu, const ModelConfig& cfg, std::uint64_t seed) {
  const auto st = cfg.codec.temporal_stride, ss = cfg.codec.spatial_stride;
  if (vcu.video_len % st != 0 || vcu.height() % ss != 0 || vcu.width() % ss != 0) {
    throw DimensionError("seeded_noise_for: video " + shape_str(vcu.frames.shape()) + " does not fit the codec strides");
  }
  const Shape shape{vcu.ref_count + vcu.video_len / st, vcu.height() / ss, vcu.width() / ss, cfg.codec.channels()};
  Rng rng(Rng::derive_seed(seed, fnv1a64("noise" + shape_str(shape))));
  return normal<float>(rng, shape);
}

FrameSeq euler_sample(const VelocityFn& velocity, const ModelConfig& cfg, const Vcu& vcu, const SampleConfig& sc) {
  sc.check();
  const auto problems = validate(vcu);
  if (!problems.empty()) throw ValueError("euler_sample: invalid Vcu: " + problems.front().message);
  const auto x = euler_integrate(velocity, seeded_noise_for(vcu, cfg, sc.seed), text_tokens(vcu.prompt, cfg),
                                 text_tokens("", cfg), sc);
  auto out = decode_video(strip_refs(x, vcu.ref_count), cfg.codec);
  for (auto& v : out.data()) v = std::clamp(v, -1.0f, 1.0f);
  if (sc.composite_inactive) {
    const auto off = static_cast<std::size_t>(vcu.ref_count * vcu.height() * vcu.width());
    for (std::size_t p = 0; p < out.size() / 3; ++p) {
      if (vcu.masks[off + p] == 0.0f) std::copy_n(vcu.frames.ptr() + 3 * (off + p), 3, out.ptr() + 3 * p);
    }
  }
  return out;
}

FrameSeq euler_sample(const ParamStore& params, const ModelConfig& cfg, const Vcu& vcu, const SampleConfig& sc) {
  const auto bundle = encode_vcu(vcu, cfg.codec, cfg.decouple);
  return euler_sample(model_velocity(params, cfg, bundle), cfg, vcu, sc);
}

}  // namespace vace
