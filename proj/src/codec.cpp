// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/codec.hpp"

#include <string>

#include "vace/ops.hpp"

namespace vace {

void CodecConfig::check() const {
  if (temporal_stride < 1 || spatial_stride < 1) {
    throw ConfigError("codec: strides must be >= 1 (got temporal " + std::to_string(temporal_stride) +
                      ", spatial " + std::to_string(spatial_stride) + ")");
  }
}

namespace {

void require_divisible(const char* op, const char* axis, std::int64_t extent, std::int64_t stride) {
  if (extent % stride != 0) {
    throw DimensionError(std::string(op) + ": " + axis + " extent " + std::to_string(extent) +
                         " is not divisible by stride " + std::to_string(stride));
  }
}

}  // namespace

Decoupled decouple(const FrameSeq& frames, const MaskSeq& masks) {
  if (frames.rank() != 4 || frames.dim(3) != 3 || masks.rank() != 3 || masks.dim(0) != frames.dim(0) ||
      masks.dim(1) != frames.dim(1) || masks.dim(2) != frames.dim(2)) {
    ops::dim_error("decouple", frames.shape(), masks.shape());
  }
  Decoupled out{FrameSeq(frames.shape()), FrameSeq(frames.shape())};
  for (std::size_t p = 0; p < masks.size(); ++p) {
    const float m = masks[p];
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = frames[p * 3 + c];
      // Select rather than multiply so the partition is exact (no -0 or rounding).
      out.reactive[p * 3 + c] = m != 0.0f ? v : 0.0f;
      out.inactive[p * 3 + c] = m != 0.0f ? 0.0f : v;
    }
  }
  return out;
}

LatentGrid encode_video(const FrameSeq& video, const CodecConfig& cfg) {
  cfg.check();
  if (video.rank() != 4 || video.dim(3) != 3) ops::dim_error("encode_video", video.shape());
  const auto st = cfg.temporal_stride, ss = cfg.spatial_stride;
  const auto n = video.dim(0), h = video.dim(1), w = video.dim(2);
  require_divisible("encode_video", "temporal", n, st);
  require_divisible("encode_video", "height", h, ss);
  require_divisible("encode_video", "width", w, ss);
  const auto d = cfg.channels();
  LatentGrid out({n / st, h / ss, w / ss, d});
  for (std::int64_t t = 0; t < n / st; ++t)
    for (std::int64_t y = 0; y < h / ss; ++y)
      for (std::int64_t x = 0; x < w / ss; ++x) {
        float* cell = out.ptr() + out.offset({t, y, x, 0});
        for (std::int64_t dt = 0; dt < st; ++dt)
          for (std::int64_t dy = 0; dy < ss; ++dy)
            for (std::int64_t dx = 0; dx < ss; ++dx) {
              const float* px = video.ptr() + video.offset({t * st + dt, y * ss + dy, x * ss + dx, 0});
              float* dst = cell + ((dt * ss + dy) * ss + dx) * 3;
              dst[0] = px[0];
              dst[1] = px[1];
              dst[2] = px[2];
            }
      }
  return out;
}

FrameSeq decode_video(const LatentGrid& latent, const CodecConfig& cfg) {
  cfg.check();
  if (latent.rank() != 4) ops::dim_error("decode_video", latent.shape());
  if (latent.dim(3) != cfg.channels()) {
    throw DimensionError("decode_video: latent has " + std::to_string(latent.dim(3)) + " channels, codec expects " +
                         std::to_string(cfg.channels()));
  }
  const auto st = cfg.temporal_stride, ss = cfg.spatial_stride;
  const auto nl = latent.dim(0), hl = latent.dim(1), wl = latent.dim(2);
  FrameSeq out({nl * st, hl * ss, wl * ss, 3});
  for (std::int64_t t = 0; t < nl; ++t)
    for (std::int64_t y = 0; y < hl; ++y)
      for (std::int64_t x = 0; x < wl; ++x) {
        const float* cell = latent.ptr() + latent.offset({t, y, x, 0});
        for (std::int64_t dt = 0; dt < st; ++dt)
          for (std::int64_t dy = 0; dy < ss; ++dy)
            for (std::int64_t dx = 0; dx < ss; ++dx) {
              float* px = out.ptr() + out.offset({t * st + dt, y * ss + dy, x * ss + dx, 0});
              const float* src = cell + ((dt * ss + dy) * ss + dx) * 3;
              px[0] = src[0];
              px[1] = src[1];
              px[2] = src[2];
            }
      }
  return out;
}

Tensor encode_mask(const MaskSeq& masks, const CodecConfig& cfg) {
  cfg.check();
  if (masks.rank() != 3) ops::dim_error("encode_mask", masks.shape());
  const auto st = cfg.temporal_stride, ss = cfg.spatial_stride;
  const auto n = masks.dim(0), h = masks.dim(1), w = masks.dim(2);
  require_divisible("encode_mask", "temporal", n, st);
  require_divisible("encode_mask", "height", h, ss);
  require_divisible("encode_mask", "width", w, ss);
  Tensor out({n / st, h / ss, w / ss, 1});
  const float inv_count = 1.0f / static_cast<float>(st * ss * ss);
  for (std::int64_t t = 0; t < n / st; ++t)
    for (std::int64_t y = 0; y < h / ss; ++y)
      for (std::int64_t x = 0; x < w / ss; ++x) {
        float total = 0.0f;
        for (std::int64_t dt = 0; dt < st; ++dt)
          for (std::int64_t dy = 0; dy < ss; ++dy)
            for (std::int64_t dx = 0; dx < ss; ++dx) total += masks.at({t * st + dt, y * ss + dy, x * ss + dx});
        out.at({t, y, x, 0}) = total * inv_count;
      }
  return out;
}

LatentGrid encode_references(const FrameSeq& refs, const CodecConfig& cfg) {
  cfg.check();
  if (refs.rank() != 4 || refs.dim(3) != 3) ops::dim_error("encode_references", refs.shape());
  const auto l = refs.dim(0), st = cfg.temporal_stride;
  const auto frame_size = static_cast<std::size_t>(refs.dim(1) * refs.dim(2) * 3);
  FrameSeq replicated({l * st, refs.dim(1), refs.dim(2), 3});
  for (std::int64_t r = 0; r < l; ++r)
    for (std::int64_t k = 0; k < st; ++k)
      std::copy_n(refs.ptr() + static_cast<std::size_t>(r) * frame_size, frame_size,
                  replicated.ptr() + static_cast<std::size_t>(r * st + k) * frame_size);
  return encode_video(replicated, cfg);
}

LatentBundle encode_vcu(const Vcu& vcu, const CodecConfig& cfg, bool decouple_concepts) {
  if (const auto problems = validate(vcu); !problems.empty()) {
    throw ValueError("encode_vcu: invalid Vcu: " + problems.front().path + ": " + problems.front().message);
  }
  const auto l = vcu.ref_count;
  const auto total = vcu.frames.dim(0);
  const auto refs = ops::slice(vcu.frames, 0, 0, l);
  const auto video = ops::slice(vcu.frames, 0, l, total);
  const auto video_masks = ops::slice(vcu.masks, 0, l, total);

  LatentBundle b;
  b.ref_latent_len = l;
  const auto m_video = encode_mask(video_masks, cfg);
  LatentGrid ref_lat = encode_references(refs, cfg);
  const LatentGrid ref_zero(ref_lat.shape());
  if (decouple_concepts) {
    const auto parts = decouple(video, video_masks);
    const auto xc = encode_video(parts.reactive, cfg);
    const auto xk = encode_video(parts.inactive, cfg);
    b.x_c = ops::concat<float>({&ref_zero, &xc}, 0);
    b.x_k = ops::concat<float>({&ref_lat, &xk}, 0);
  } else {
    const auto xc = encode_video(video, cfg);
    b.x_c = ops::concat<float>({&ref_lat, &xc}, 0);
    b.x_k = LatentGrid(b.x_c.shape());
  }
  const Tensor m_ref({l, m_video.dim(1), m_video.dim(2), 1});
  b.m_lat = ops::concat<float>({&m_ref, &m_video}, 0);
  return b;
}

LatentGrid encode_target(const Vcu& vcu, const FrameSeq& target, const CodecConfig& cfg) {
  if (target.rank() != 4 || target.dim(0) != vcu.video_len || target.dim(1) != vcu.height() ||
      target.dim(2) != vcu.width()) {
    ops::dim_error("encode_target", target.shape(), vcu.frames.shape());
  }
  const auto refs = ops::slice(vcu.frames, 0, 0, vcu.ref_count);
  const auto ref_lat = encode_references(refs, cfg);
  const auto tail = encode_video(target, cfg);
  return ops::concat<float>({&ref_lat, &tail}, 0);
}

LatentGrid strip_refs(const LatentGrid& latent, std::int64_t ref_latent_len) {
  if (latent.rank() < 1 || ref_latent_len < 0 || ref_latent_len > latent.dim(0)) {
    throw DimensionError("strip_refs: cannot drop " + std::to_string(ref_latent_len) + " frames from " +
                         shape_str(latent.shape()));
  }
  return ops::slice(latent, 0, ref_latent_len, latent.dim(0));
}

}  // namespace vace
