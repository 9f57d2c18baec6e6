// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Concept decoupling and the toy latent pathway.
//
// The "VAE" here is an exactly invertible space-to-depth rearrangement: each
// s_t x s_s x s_s x 3 pixel block becomes one latent cell with
// d = 3 * s_t * s_s^2 channels, channel index ((dt * s_s + dy) * s_s + dx) * 3 + c.

#pragma once

#include <cstdint>

#include "vace/tensor.hpp"
#include "vace/vcu.hpp"

namespace vace {

struct CodecConfig {
  std::int64_t temporal_stride = 2;
  std::int64_t spatial_stride = 4;

  std::int64_t channels() const { return 3 * temporal_stride * spatial_stride * spatial_stride; }
  void check() const;
  friend bool operator==(const CodecConfig&, const CodecConfig&) = default;
};

/// (n', h', w', d) latent tensor.
using LatentGrid = Tensor;

struct LatentBundle {
  LatentGrid x_c;  // reactive stream
  LatentGrid x_k;  // inactive stream (references live here)
  Tensor m_lat;    // (n'_total, h', w', 1) in [0, 1]
  std::int64_t ref_latent_len = 0;

  std::int64_t total_frames() const { return x_c.dim(0); }
};

struct Decoupled {
  FrameSeq reactive;  // F * M
  FrameSeq inactive;  // F * (1 - M)
};

/// Splits frames by the (binary) mask, broadcast over channels.
Decoupled decouple(const FrameSeq& frames, const MaskSeq& masks);

LatentGrid encode_video(const FrameSeq& video, const CodecConfig& cfg);
FrameSeq decode_video(const LatentGrid& latent, const CodecConfig& cfg);

/// Area-average pooling of each s_t x s_s x s_s block -> (n', h', w', 1).
Tensor encode_mask(const MaskSeq& masks, const CodecConfig& cfg);

/// Each reference frame is replicated s_t times and encoded to one latent frame.
LatentGrid encode_references(const FrameSeq& refs, const CodecConfig& cfg);

/// Builds the context latents of a Vcu. With `decouple_concepts` off, every
/// frame (references included) is routed to x_c and x_k is zero.
LatentBundle encode_vcu(const Vcu& vcu, const CodecConfig& cfg, bool decouple_concepts = true);

/// Clean latent of a target video with the Vcu's references prepended.
LatentGrid encode_target(const Vcu& vcu, const FrameSeq& target, const CodecConfig& cfg);

/// Drops the leading `ref_latent_len` latent frames.
LatentGrid strip_refs(const LatentGrid& latent, std::int64_t ref_latent_len);

}  // namespace vace
