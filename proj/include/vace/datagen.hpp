// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Procedural moving-shape videos, condition renderers, masks, and the task
// sampler that turns them into training samples.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vace/rng.hpp"
#include "vace/vcu.hpp"

namespace vace {

enum class ShapeKind : std::uint8_t { circle, square, triangle };

const char* shape_kind_name(ShapeKind kind);

using Rgb = std::array<float, 3>;

/// Geometry is in pixels with pixel (x, y) centered at (x + 0.5, y + 0.5).
/// `size` is the radius of a circle, the half side of a square, and the half
/// extent of an upward triangle; the bounding box is [c - size, c + size]^2
/// for every kind.
struct SceneShape {
  ShapeKind kind = ShapeKind::circle;
  Rgb color{};
  double size = 4.0;
  double x = 0.0, y = 0.0;    // center at frame 0
  double vx = 0.0, vy = 0.0;  // pixels per frame
  int z = 0;                  // larger is nearer

  double cx(std::int64_t frame) const { return x + vx * static_cast<double>(frame); }
  double cy(std::int64_t frame) const { return y + vy * static_cast<double>(frame); }
  bool covers(std::int64_t frame, double px, double py) const;
};

struct Scene {
  std::vector<SceneShape> shapes;
  Rgb top{};     // background color of the first row
  Rgb bottom{};  // background color of the last row
};

struct Geometry {
  std::int64_t n = 8;
  std::int64_t h = 32;
  std::int64_t w = 32;
  std::int64_t min_shapes = 1;
  std::int64_t max_shapes = 3;
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// 1-3 shapes on a canvas with integer velocities in [-2, 2] and positions and
/// sizes on a 1/8 pixel grid (so shifted frames rasterize exactly).
Scene random_scene(Rng& rng, const Geometry& geo);

/// Painter's algorithm in increasing z over a vertical two-color gradient.
FrameSeq render_scene(const Scene& scene, std::int64_t n, std::int64_t h, std::int64_t w);

/// (n, h, w) support of one shape over time.
MaskSeq shape_support(const SceneShape& shape, std::int64_t n, std::int64_t h, std::int64_t w);

/// Index of the nearest shape covering each pixel, -1 for background; (n, h, w) row-major.
std::vector<int> topmost_index(const Scene& scene, std::int64_t n, std::int64_t h, std::int64_t w);

enum class ConditionKind : std::uint8_t { gray, layout, scribble, depth_proxy, flow };

const char* condition_kind_name(ConditionKind kind);

/// Condition video derived from the scene and its rendering:
///   gray        - luma 0.299 R + 0.587 G + 0.114 B in all three channels
///   layout      - black canvas, one-pixel bounding-box outline per shape in its color
///   scribble    - Sobel magnitude of the gray video / 8, thresholded at 0.2, white on black
///   depth_proxy - -1 on background, -1 + 0.5 (z + 1) under the topmost shape
///   flow        - color wheel of the topmost shape's velocity: saturation
///                 s = min(|v| / (2 sqrt 2), 1), angle a = atan2(vy, vx),
///                 rgb = s (cos a, cos(a - 2pi/3), cos(a + 2pi/3)); zero motion is mid-gray
FrameSeq condition(const Scene& scene, const FrameSeq& video, ConditionKind kind);

enum class MaskStyle : std::uint8_t { instance_follow, static_rect, augmented };

/// Chebyshev dilation by `radius` pixels within each frame.
MaskSeq dilate(const MaskSeq& masks, std::int64_t radius);

/// instance_follow - support of a random shape, dilated by a random radius in [0, 3];
/// static_rect     - one rectangle covering 10-60% of the frame, constant over time;
/// augmented       - union of 1-3 rectangles, each jittered by up to 2 px per frame.
MaskSeq random_mask(Rng& rng, const Scene& scene, std::int64_t n, std::int64_t h, std::int64_t w, MaskStyle style);

enum class SampleTask : std::uint8_t {
  t2v,
  r2v_object,
  v2v_gray,
  v2v_layout,
  v2v_scribble,
  v2v_depth,
  v2v_flow,
  mv2v_inpaint,
  mv2v_outpaint,
  extension_first,
  extension_ends,
  extension_random,
  composite,
};

const char* sample_task_name(SampleTask task);
SampleTask parse_sample_task(const std::string& name);
const std::vector<SampleTask>& all_sample_tasks();

struct TrainSample {
  Vcu vcu;
  FrameSeq target;  // (n, h, w, 3) ground-truth video
  SampleTask task = SampleTask::t2v;
  std::uint64_t seed = 0;
};

/// Fixed composite recipe: `base` plus optional references and an optional
/// condition video swapped into the frames to regenerate.
struct CompositeRecipe {
  SampleTask base = SampleTask::mv2v_inpaint;
  bool add_references = true;
  std::optional<ConditionKind> swap;
};

/// Deterministic in (task, seed, geometry). The scene, masks and references
/// come from task-independent sub-streams of `seed`, so e.g. the inpaint and
/// outpaint samples of one seed share scene and mask.
TrainSample make_sample(SampleTask task, std::uint64_t seed, const Geometry& geo = {});
TrainSample make_composite(const CompositeRecipe& recipe, std::uint64_t seed, const Geometry& geo = {});

/// Prompt naming each shape's color, kind and motion direction, nearest first.
std::string describe(const Scene& scene);

/// Pixel <-> byte mapping of the dataset container: code = round((x + 1) * 127.5),
/// value = code / 127.5 - 1, except that the midpoint code 128 decodes to exactly 0.
std::uint8_t encode_pixel(float x);
float decode_pixel(std::uint8_t code);
/// decode(encode(x)) elementwise; idempotent.
FrameSeq quantize(const FrameSeq& frames);

/// `count` samples cycling through `tasks`; sample i uses seed derive_seed(seed, i).
std::vector<TrainSample> generate(const std::vector<SampleTask>& tasks, std::int64_t count, std::uint64_t seed,
                                  const Geometry& geo = {});

/// Dataset container: `manifest` plus one record file per sample.
void write_dataset(const std::vector<TrainSample>& samples, const std::filesystem::path& dir);
std::vector<TrainSample> read_dataset(const std::filesystem::path& dir);

/// Record bytes of one sample (also used for data digests).
std::vector<std::uint8_t> encode_record(const TrainSample& sample);
TrainSample decode_record(const std::vector<std::uint8_t>& bytes);

}  // namespace vace
