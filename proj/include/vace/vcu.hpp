// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vace/tensor.hpp"

namespace vace {

/// (count, h, w, 3) frames with values in [-1, 1].
using FrameSeq = Tensor;
/// (count, h, w) binary masks: 1 = regenerate, 0 = keep.
using MaskSeq = Tensor;

enum class TaskKind : std::uint8_t { t2v = 0, r2v = 1, v2v = 2, mv2v = 3, composite = 4 };

const char* task_kind_name(TaskKind kind);

/// Task label carried for reporting only; no computation branches on it.
struct TaskTag {
  TaskKind kind = TaskKind::t2v;
  /// Constituent base tasks when kind == composite, in application order.
  std::vector<TaskKind> parts;

  std::string name() const;
  /// Packs into 32 bits: nibble 0 = kind, nibbles 1..7 = parts + 1 (0 terminates).
  std::uint32_t encode() const;
  static TaskTag decode(std::uint32_t code);

  friend bool operator==(const TaskTag&, const TaskTag&) = default;
};

/// Video Condition Unit: prompt + aligned frame and mask sequences.
/// The first `ref_count` entries are reference frames with all-zero masks.
struct Vcu {
  std::string prompt;
  FrameSeq frames;
  MaskSeq masks;
  std::int64_t ref_count = 0;
  std::int64_t video_len = 0;
  TaskTag task_tag;

  std::int64_t height() const { return frames.rank() == 4 ? frames.dim(1) : 0; }
  std::int64_t width() const { return frames.rank() == 4 ? frames.dim(2) : 0; }
};

/// Field equality ignoring task_tag.
bool same_layout(const Vcu& a, const Vcu& b);

Vcu make_t2v(std::string prompt, std::int64_t n, std::int64_t h, std::int64_t w);
Vcu make_r2v(std::string prompt, const FrameSeq& refs, std::int64_t n);
Vcu make_v2v(std::string prompt, const FrameSeq& video);
Vcu make_mv2v(std::string prompt, const FrameSeq& video, const MaskSeq& masks);

/// Prepends reference frames (with zero masks) in front of any existing ones.
Vcu with_references(const Vcu& vcu, const FrameSeq& refs);

struct Anchor {
  std::int64_t index = 0;
  Tensor frame;  // (h, w, 3)
};

/// Zero frames except at the anchors. In condition mode the anchors are control
/// signals to repaint (all-one masks); otherwise they are kept (zero mask there).
Vcu make_frame_anchored(std::string prompt, const std::vector<Anchor>& anchors, std::int64_t n, std::int64_t h,
                        std::int64_t w, bool condition_mode);

struct Violation {
  std::string path;
  std::string message;
};

/// Every invariant violation of `vcu`; empty means valid. Never throws.
std::vector<Violation> validate(const Vcu& vcu);

/// 1 - m elementwise.
MaskSeq complement(const MaskSeq& masks);

}  // namespace vace
