// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/vcu.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vace/ops.hpp"

namespace vace {

const char* task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::t2v: return "T2V";
    case TaskKind::r2v: return "R2V";
    case TaskKind::v2v: return "V2V";
    case TaskKind::mv2v: return "MV2V";
    case TaskKind::composite: return "Composite";
  }
  return "?";
}

std::string TaskTag::name() const {
  std::string out = task_kind_name(kind);
  if (kind == TaskKind::composite) {
    out += '(';
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += '+';
      out += task_kind_name(parts[i]);
    }
    out += ')';
  }
  return out;
}

std::uint32_t TaskTag::encode() const {
  if (parts.size() > 7) throw ArgumentError("task tag: at most 7 composite parts can be encoded");
  std::uint32_t code = static_cast<std::uint32_t>(kind);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    code |= (static_cast<std::uint32_t>(parts[i]) + 1u) << (4 * (i + 1));
  }
  return code;
}

TaskTag TaskTag::decode(std::uint32_t code) {
  auto as_kind = [](std::uint32_t v) {
    if (v > static_cast<std::uint32_t>(TaskKind::composite)) throw ValueError("task tag: bad kind code");
    return static_cast<TaskKind>(v);
  };
  TaskTag tag;
  tag.kind = as_kind(code & 0xF);
  for (int i = 1; i < 8; ++i) {
    const auto nib = (code >> (4 * i)) & 0xF;
    if (nib == 0) break;
    tag.parts.push_back(as_kind(nib - 1));
  }
  return tag;
}

bool same_layout(const Vcu& a, const Vcu& b) {
  return a.prompt == b.prompt && ops::bitwise_equal(a.frames, b.frames) && ops::bitwise_equal(a.masks, b.masks) &&
         a.ref_count == b.ref_count && a.video_len == b.video_len;
}

namespace {

void require_positive(const char* op, std::int64_t n, std::int64_t h, std::int64_t w) {
  if (n < 1 || h < 1 || w < 1) {
    throw ArgumentError(std::string(op) + ": n, h, w must be positive (got " + std::to_string(n) + ", " +
                        std::to_string(h) + ", " + std::to_string(w) + ")");
  }
}

void require_frames(const char* op, const FrameSeq& f) {
  if (f.rank() != 4 || f.dim(3) != 3 || f.dim(1) < 1 || f.dim(2) < 1) {
    throw DimensionError(std::string(op) + ": frames must be (count, h, w, 3), got " + shape_str(f.shape()));
  }
}

void require_binary(const char* op, const MaskSeq& m) {
  for (auto v : m.data()) {
    if (v != 0.0f && v != 1.0f) throw ValueError(std::string(op) + ": mask not binary");
  }
}

TaskTag composed(const TaskTag& base, TaskKind added) {
  TaskTag tag{TaskKind::composite, {added}};
  if (base.kind == TaskKind::composite) tag.parts.insert(tag.parts.end(), base.parts.begin(), base.parts.end());
  else tag.parts.push_back(base.kind);
  return tag;
}

}  // namespace

Vcu make_t2v(std::string prompt, std::int64_t n, std::int64_t h, std::int64_t w) {
  require_positive("make_t2v", n, h, w);
  Vcu v;
  v.prompt = std::move(prompt);
  v.frames = Tensor({n, h, w, 3}, 0.0f);
  v.masks = Tensor({n, h, w}, 1.0f);
  v.video_len = n;
  v.task_tag = {TaskKind::t2v, {}};
  return v;
}

Vcu make_r2v(std::string prompt, const FrameSeq& refs, std::int64_t n) {
  require_frames("make_r2v", refs);
  if (refs.dim(0) < 1) throw ArgumentError("make_r2v: reference list is empty");
  auto v = with_references(make_t2v(std::move(prompt), n, refs.dim(1), refs.dim(2)), refs);
  v.task_tag = {TaskKind::r2v, {}};
  return v;
}

Vcu make_v2v(std::string prompt, const FrameSeq& video) {
  require_frames("make_v2v", video);
  if (video.dim(0) < 1) throw ArgumentError("make_v2v: video is empty");
  Vcu v;
  v.prompt = std::move(prompt);
  v.frames = video;
  v.masks = Tensor({video.dim(0), video.dim(1), video.dim(2)}, 1.0f);
  v.video_len = video.dim(0);
  v.task_tag = {TaskKind::v2v, {}};
  return v;
}

Vcu make_mv2v(std::string prompt, const FrameSeq& video, const MaskSeq& masks) {
  require_frames("make_mv2v", video);
  if (video.dim(0) < 1) throw ArgumentError("make_mv2v: video is empty");
  if (masks.rank() != 3 || masks.dim(0) != video.dim(0) || masks.dim(1) != video.dim(1) ||
      masks.dim(2) != video.dim(2)) {
    throw DimensionError("make_mv2v: masks " + shape_str(masks.shape()) + " do not align with frames " +
                         shape_str(video.shape()));
  }
  require_binary("make_mv2v", masks);
  Vcu v;
  v.prompt = std::move(prompt);
  v.frames = video;
  v.masks = masks;
  v.video_len = video.dim(0);
  v.task_tag = {TaskKind::mv2v, {}};
  return v;
}

Vcu with_references(const Vcu& vcu, const FrameSeq& refs) {
  require_frames("with_references", refs);
  if (refs.dim(1) != vcu.height() || refs.dim(2) != vcu.width()) {
    throw DimensionError("with_references: reference shape " + shape_str(refs.shape()) +
                         " does not match frames " + shape_str(vcu.frames.shape()));
  }
  Vcu out;
  out.prompt = vcu.prompt;
  out.frames = ops::concat<float>({&refs, &vcu.frames}, 0);
  const Tensor ref_masks({refs.dim(0), refs.dim(1), refs.dim(2)}, 0.0f);
  out.masks = ops::concat<float>({&ref_masks, &vcu.masks}, 0);
  out.ref_count = vcu.ref_count + refs.dim(0);
  out.video_len = vcu.video_len;
  out.task_tag = composed(vcu.task_tag, TaskKind::r2v);
  return out;
}

Vcu make_frame_anchored(std::string prompt, const std::vector<Anchor>& anchors, std::int64_t n, std::int64_t h,
                        std::int64_t w, bool condition_mode) {
  require_positive("make_frame_anchored", n, h, w);
  Vcu v = make_t2v(std::move(prompt), n, h, w);
  std::set<std::int64_t> seen;
  const auto frame_size = static_cast<std::size_t>(h * w * 3);
  const auto mask_size = static_cast<std::size_t>(h * w);
  for (const auto& a : anchors) {
    if (a.index < 0 || a.index >= n) {
      throw ArgumentError("make_frame_anchored: anchor index " + std::to_string(a.index) + " outside [0, " +
                          std::to_string(n) + ")");
    }
    if (!seen.insert(a.index).second) {
      throw ArgumentError("make_frame_anchored: duplicate anchor index " + std::to_string(a.index));
    }
    if (a.frame.shape() != Shape{h, w, 3}) {
      throw DimensionError("make_frame_anchored: anchor frame " + shape_str(a.frame.shape()) + " vs (" +
                           std::to_string(h) + "," + std::to_string(w) + ",3)");
    }
    const auto i = static_cast<std::size_t>(a.index);
    std::copy_n(a.frame.ptr(), frame_size, v.frames.ptr() + i * frame_size);
    if (!condition_mode) std::fill_n(v.masks.ptr() + i * mask_size, mask_size, 0.0f);
  }
  v.task_tag = {condition_mode ? TaskKind::v2v : TaskKind::mv2v, {}};
  return v;
}

std::vector<Violation> validate(const Vcu& vcu) {
  std::vector<Violation> out;
  const auto& f = vcu.frames;
  const auto& m = vcu.masks;
  if (vcu.video_len < 1) out.push_back({"video_len", "video length must be at least 1"});
  if (vcu.ref_count < 0) out.push_back({"ref_count", "reference count must be non-negative"});
  const bool frames_ok = f.rank() == 4 && f.dim(3) == 3 && f.dim(1) > 0 && f.dim(2) > 0;
  const bool masks_ok = m.rank() == 3;
  if (!frames_ok) out.push_back({"frames", "frames must be (count, h, w, 3), got " + shape_str(f.shape())});
  if (!masks_ok) out.push_back({"masks", "masks must be (count, h, w), got " + shape_str(m.shape())});
  if (!frames_ok || !masks_ok) return out;

  const auto expected = vcu.ref_count + vcu.video_len;
  if (f.dim(0) != expected) {
    out.push_back({"frames", "length " + std::to_string(f.dim(0)) + " != ref_count + video_len = " +
                                 std::to_string(expected)});
  }
  if (m.dim(0) != f.dim(0)) {
    out.push_back({"masks", "length " + std::to_string(m.dim(0)) + " != frames length " + std::to_string(f.dim(0))});
  }
  if (m.dim(1) != f.dim(1) || m.dim(2) != f.dim(2)) {
    out.push_back({"masks", "spatial shape " + shape_str(m.shape()) + " does not match frames " +
                                shape_str(f.shape())});
    return out;
  }
  const auto frame_size = static_cast<std::size_t>(f.dim(1) * f.dim(2) * 3);
  for (std::int64_t i = 0; i < f.dim(0); ++i) {
    const float* p = f.ptr() + static_cast<std::size_t>(i) * frame_size;
    const bool in_range = std::all_of(p, p + frame_size, [](float v) { return std::isfinite(v) && v >= -1.0f && v <= 1.0f; });
    if (!in_range) out.push_back({"frames[" + std::to_string(i) + "]", "frame values outside [-1, 1]"});
  }
  const auto mask_size = static_cast<std::size_t>(m.dim(1) * m.dim(2));
  for (std::int64_t i = 0; i < m.dim(0); ++i) {
    const float* p = m.ptr() + static_cast<std::size_t>(i) * mask_size;
    const std::string path = "masks[" + std::to_string(i) + "]";
    if (!std::all_of(p, p + mask_size, [](float v) { return v == 0.0f || v == 1.0f; })) {
      out.push_back({path, "mask not binary"});
    }
    if (i < vcu.ref_count && !std::all_of(p, p + mask_size, [](float v) { return v == 0.0f; })) {
      out.push_back({path, "reference mask must be zero"});
    }
  }
  return out;
}

MaskSeq complement(const MaskSeq& masks) {
  MaskSeq out(masks.shape());
  for (std::size_t i = 0; i < masks.size(); ++i) out[i] = 1.0f - masks[i];
  return out;
}

}  // namespace vace
