// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vace/errors.hpp"

namespace vace {
namespace {

struct PaletteEntry {
  const char* name;
  Rgb rgb;
};

constexpr PaletteEntry kPalette[] = {
    {"red", {0.9f, -0.8f, -0.8f}},    {"green", {-0.8f, 0.8f, -0.8f}}, {"blue", {-0.8f, -0.6f, 0.9f}},
    {"yellow", {0.9f, 0.9f, -0.8f}},  {"cyan", {-0.8f, 0.9f, 0.9f}},   {"magenta", {0.9f, -0.8f, 0.9f}},
    {"white", {0.95f, 0.95f, 0.95f}}, {"orange", {0.95f, 0.2f, -0.9f}},
};

// Sub-stream ids of a sample seed.
enum Stream : std::uint64_t { kScene = 1, kMask = 2, kRefs = 3, kAnchors = 4, kRecipe = 5 };

const char* color_name(const Rgb& c) {
  for (const auto& p : kPalette) {
    if (p.rgb == c) return p.name;
  }
  return "colored";
}

double on_grid(Rng& rng, double lo, double hi) {
  return static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(lo * 8), static_cast<std::int64_t>(hi * 8))) /
         8.0;
}

void check_dims(std::int64_t n, std::int64_t h, std::int64_t w, const char* who) {
  if (n <= 0 || h <= 0 || w <= 0) {
    throw ArgumentError(std::string(who) + ": n, h, w must be positive");
  }
}

std::vector<const SceneShape*> by_depth(const Scene& scene) {
  std::vector<const SceneShape*> order;
  for (const auto& s : scene.shapes) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->z < b->z; });
  return order;
}

std::string motion_word(const SceneShape& s) {
  std::string v = s.vy < 0 ? "up" : s.vy > 0 ? "down" : "";
  std::string h = s.vx < 0 ? "left" : s.vx > 0 ? "right" : "";
  if (v.empty() && h.empty()) return "standing still";
  if (v.empty()) return "moving " + h;
  if (h.empty()) return "moving " + v;
  return "moving " + v + "-" + h;
}

FrameSeq zero_where(const FrameSeq& frames, const MaskSeq& masks) {
  FrameSeq out = frames;
  for (std::size_t p = 0; p < masks.size(); ++p) {
    if (masks[p] != 0.0f) std::fill_n(out.ptr() + 3 * p, 3, 0.0f);
  }
  return out;
}

// One centered crop per chosen shape on a zero background.
FrameSeq reference_crops(Rng& rng, const Scene& scene, std::int64_t h, std::int64_t w) {
  const auto k = static_cast<std::int64_t>(scene.shapes.size());
  if (k == 0) throw ArgumentError("reference crops: scene has no shapes");
  const auto count = rng.uniform_int(1, std::min<std::int64_t>(2, k));
  std::vector<std::int64_t> idx(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = 0; i < count; ++i) {
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(rng.uniform_int(i, k - 1))]);
  }
  FrameSeq refs({count, h, w, 3});
  for (std::int64_t r = 0; r < count; ++r) {
    SceneShape s = scene.shapes[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
    s.x = static_cast<double>(w) / 2.0;
    s.y = static_cast<double>(h) / 2.0;
    s.vx = s.vy = 0.0;
    const auto jitter = static_cast<float>(rng.uniform(-0.1, 0.1));
    const auto support = shape_support(s, 1, h, w);
    for (std::int64_t p = 0; p < h * w; ++p) {
      if (support[static_cast<std::size_t>(p)] == 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        refs[static_cast<std::size_t>((r * h * w + p) * 3 + c)] = std::clamp(s.color[c] + jitter, -1.0f, 1.0f);
      }
    }
  }
  return quantize(refs);
}

std::vector<Anchor> anchors_for(SampleTask task, Rng& rng, const FrameSeq& target) {
  const auto n = target.dim(0), h = target.dim(1), w = target.dim(2);
  std::vector<std::int64_t> idx;
  if (task == SampleTask::extension_first) {
    idx = {0};
  } else if (task == SampleTask::extension_ends) {
    idx = n > 1 ? std::vector<std::int64_t>{0, n - 1} : std::vector<std::int64_t>{0};
  } else {
    const auto count = rng.uniform_int(1, std::max<std::int64_t>(1, n / 2));
    std::vector<std::int64_t> all(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = 0; i < count; ++i) {
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(rng.uniform_int(i, n - 1))]);
    }
    idx.assign(all.begin(), all.begin() + count);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<Anchor> out;
  const auto frame_size = static_cast<std::size_t>(h * w * 3);
  for (auto i : idx) {
    const auto* src = target.ptr() + static_cast<std::size_t>(i) * frame_size;
    out.push_back({i, Tensor({h, w, 3}, std::vector<float>(src, src + frame_size))});
  }
  return out;
}

// Everything derived from the scene sub-stream of a seed.
struct Drawn {
  Scene scene;
  FrameSeq target;
  std::string prompt;
};

Drawn draw(std::uint64_t seed, const Geometry& geo) {
  check_dims(geo.n, geo.h, geo.w, "make_sample");
  Rng rng = Rng(seed).split(kScene);
  Drawn d;
  d.scene = random_scene(rng, geo);
  d.target = quantize(render_scene(d.scene, geo.n, geo.h, geo.w));
  d.prompt = describe(d.scene);
  return d;
}

ConditionKind condition_of(SampleTask task) {
  switch (task) {
    case SampleTask::v2v_gray: return ConditionKind::gray;
    case SampleTask::v2v_layout: return ConditionKind::layout;
    case SampleTask::v2v_scribble: return ConditionKind::scribble;
    case SampleTask::v2v_depth: return ConditionKind::depth_proxy;
    default: return ConditionKind::flow;
  }
}

Vcu build(SampleTask task, std::uint64_t seed, const Drawn& d, const Geometry& geo) {
  const Rng root(seed);
  switch (task) {
    case SampleTask::t2v:
      return make_t2v(d.prompt, geo.n, geo.h, geo.w);
    case SampleTask::r2v_object: {
      Rng rng = root.split(kRefs);
      return make_r2v(d.prompt, reference_crops(rng, d.scene, geo.h, geo.w), geo.n);
    }
    case SampleTask::v2v_gray:
    case SampleTask::v2v_layout:
    case SampleTask::v2v_scribble:
    case SampleTask::v2v_depth:
    case SampleTask::v2v_flow:
      return make_v2v(d.prompt, quantize(condition(d.scene, d.target, condition_of(task))));
    case SampleTask::mv2v_inpaint:
    case SampleTask::mv2v_outpaint: {
      Rng rng = root.split(kMask);
      auto m = random_mask(rng, d.scene, geo.n, geo.h, geo.w, MaskStyle::instance_follow);
      if (task == SampleTask::mv2v_outpaint) m = complement(m);
      // The region to regenerate is blanked so the target never leaks into the context.
      return make_mv2v(d.prompt, zero_where(d.target, m), m);
    }
    case SampleTask::extension_first:
    case SampleTask::extension_ends:
    case SampleTask::extension_random: {
      Rng rng = root.split(kAnchors);
      return make_frame_anchored(d.prompt, anchors_for(task, rng, d.target), geo.n, geo.h, geo.w, false);
    }
    case SampleTask::composite: break;
  }
  throw ArgumentError("make_sample: unknown task");
}

Vcu compose(const CompositeRecipe& recipe, std::uint64_t seed, const Drawn& d, const Geometry& geo) {
  if (recipe.base == SampleTask::composite) throw ArgumentError("composite: base must be a plain task");
  Vcu vcu = build(recipe.base, seed, d, geo);
  if (recipe.swap) {
    const auto cond = quantize(condition(d.scene, d.target, *recipe.swap));
    const auto off = static_cast<std::size_t>(vcu.ref_count * geo.h * geo.w);
    for (std::size_t p = 0; p < cond.size() / 3; ++p) {
      if (vcu.masks[off + p] != 0.0f) std::copy_n(cond.ptr() + 3 * p, 3, vcu.frames.ptr() + 3 * (off + p));
    }
    TaskTag tag{TaskKind::composite, {TaskKind::v2v}};
    if (vcu.task_tag.kind == TaskKind::composite) {
      tag.parts.insert(tag.parts.end(), vcu.task_tag.parts.begin(), vcu.task_tag.parts.end());
    } else {
      tag.parts.push_back(vcu.task_tag.kind);
    }
    vcu.task_tag = tag;
  }
  if (recipe.add_references) {
    Rng rng = Rng(seed).split(kRefs);
    vcu = with_references(vcu, reference_crops(rng, d.scene, geo.h, geo.w));
  }
  return vcu;
}

CompositeRecipe random_recipe(std::uint64_t seed) {
  static constexpr SampleTask kBases[] = {SampleTask::mv2v_inpaint, SampleTask::mv2v_outpaint,
                                          SampleTask::extension_first, SampleTask::extension_ends,
                                          SampleTask::extension_random};
  Rng rng = Rng(seed).split(kRecipe);
  CompositeRecipe r;
  r.base = kBases[rng.uniform_int(0, std::size(kBases) - 1)];
  r.add_references = rng.bernoulli(0.5);
  if (rng.bernoulli(0.5)) r.swap = static_cast<ConditionKind>(rng.uniform_int(0, 4));
  if (!r.add_references && !r.swap) r.add_references = true;
  return r;
}

// Little-endian byte helpers.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t count, const char* what) {
    if (bytes_.size() - pos_ < count) {
      throw ParseError(std::string("record truncated in ") + what, pos_);
    }
    const auto* p = bytes_.data() + pos_;
    pos_ += count;
    return p;
  }

  std::uint32_t u32(const char* what) {
    const auto* p = take(4, what);
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string record_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%06zu.vcu", i);
  return buf;
}

constexpr std::int64_t kMaxExtent = 1 << 16;

}  // namespace

const char* shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::circle: return "circle";
    case ShapeKind::square: return "square";
    case ShapeKind::triangle: return "triangle";
  }
  return "shape";
}

bool SceneShape::covers(std::int64_t frame, double px, double py) const {
  const double dx = px - cx(frame), dy = py - cy(frame);
  switch (kind) {
    case ShapeKind::circle: return dx * dx + dy * dy <= size * size;
    case ShapeKind::square: return std::abs(dx) <= size && std::abs(dy) <= size;
    case ShapeKind::triangle:
      // Apex at (cx, cy - size), base on y = cy + size, base width 2 size.
      return dy >= -size && dy <= size && std::abs(dx) <= (dy + size) / 2.0;
  }
  return false;
}

Scene random_scene(Rng& rng, const Geometry& geo) {
  if (geo.min_shapes < 0 || geo.max_shapes < geo.min_shapes) {
    throw ArgumentError("random_scene: bad shape count range");
  }
  Scene scene;
  for (int c = 0; c < 3; ++c) {
    scene.top[c] = static_cast<float>(rng.uniform(-1.0, 0.2));
    scene.bottom[c] = static_cast<float>(rng.uniform(-1.0, 0.2));
  }
  const auto k = rng.uniform_int(geo.min_shapes, geo.max_shapes);
  std::vector<int> depth(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) depth[static_cast<std::size_t>(i)] = static_cast<int>(i);
  for (std::int64_t i = k - 1; i > 0; --i) {
    std::swap(depth[static_cast<std::size_t>(i)], depth[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  }
  const double max_size = std::max(1.0, std::min<double>(7.0, static_cast<double>(std::min(geo.h, geo.w)) / 4.0));
  for (std::int64_t i = 0; i < k; ++i) {
    SceneShape s;
    s.kind = static_cast<ShapeKind>(rng.uniform_int(0, 2));
    s.color = kPalette[rng.uniform_int(0, std::size(kPalette) - 1)].rgb;
    s.size = on_grid(rng, std::min(3.0, max_size), max_size);
    s.x = on_grid(rng, 0.0, static_cast<double>(geo.w));
    s.y = on_grid(rng, 0.0, static_cast<double>(geo.h));
    s.vx = static_cast<double>(rng.uniform_int(-2, 2));
    s.vy = static_cast<double>(rng.uniform_int(-2, 2));
    s.z = depth[static_cast<std::size_t>(i)];
    scene.shapes.push_back(s);
  }
  return scene;
}

std::vector<int> topmost_index(const Scene& scene, std::int64_t n, std::int64_t h, std::int64_t w) {
  check_dims(n, h, w, "topmost_index");
  const auto order = by_depth(scene);
  std::vector<int> out(static_cast<std::size_t>(n * h * w), -1);
  for (std::int64_t f = 0; f < n; ++f) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        int& top = out[static_cast<std::size_t>((f * h + y) * w + x)];
        for (const auto* s : order) {
          if (s->covers(f, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
            top = static_cast<int>(s - scene.shapes.data());
          }
        }
      }
    }
  }
  return out;
}

FrameSeq render_scene(const Scene& scene, std::int64_t n, std::int64_t h, std::int64_t w) {
  const auto top = topmost_index(scene, n, h, w);
  FrameSeq out({n, h, w, 3});
  for (std::int64_t f = 0; f < n; ++f) {
    for (std::int64_t y = 0; y < h; ++y) {
      const float t = h > 1 ? static_cast<float>(y) / static_cast<float>(h - 1) : 0.0f;
      for (std::int64_t x = 0; x < w; ++x) {
        const auto p = static_cast<std::size_t>((f * h + y) * w + x);
        for (int c = 0; c < 3; ++c) {
          out[3 * p + static_cast<std::size_t>(c)] =
              top[p] >= 0 ? scene.shapes[static_cast<std::size_t>(top[p])].color[c]
                          : scene.top[c] + (scene.bottom[c] - scene.top[c]) * t;
        }
      }
    }
  }
  return out;
}

MaskSeq shape_support(const SceneShape& shape, std::int64_t n, std::int64_t h, std::int64_t w) {
  check_dims(n, h, w, "shape_support");
  MaskSeq out({n, h, w});
  for (std::int64_t f = 0; f < n; ++f) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        if (shape.covers(f, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
          out[static_cast<std::size_t>((f * h + y) * w + x)] = 1.0f;
        }
      }
    }
  }
  return out;
}

const char* condition_kind_name(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::gray: return "gray";
    case ConditionKind::layout: return "layout";
    case ConditionKind::scribble: return "scribble";
    case ConditionKind::depth_proxy: return "depth_proxy";
    case ConditionKind::flow: return "flow";
  }
  return "unknown";
}

FrameSeq condition(const Scene& scene, const FrameSeq& video, ConditionKind kind) {
  if (video.rank() != 4 || video.dim(3) != 3) throw DimensionError("condition: video must be (n, h, w, 3)");
  const auto n = video.dim(0), h = video.dim(1), w = video.dim(2);
  const auto pixels = static_cast<std::size_t>(n * h * w);
  auto luma = [&](std::size_t p) {
    return 0.299f * video[3 * p] + 0.587f * video[3 * p + 1] + 0.114f * video[3 * p + 2];
  };
  FrameSeq out({n, h, w, 3});
  switch (kind) {
    case ConditionKind::gray:
      for (std::size_t p = 0; p < pixels; ++p) std::fill_n(out.ptr() + 3 * p, 3, luma(p));
      return out;
    case ConditionKind::layout: {
      out.fill(-1.0f);
      for (const auto* s : by_depth(scene)) {
        for (std::int64_t f = 0; f < n; ++f) {
          // Pixels whose centers lie inside [c - size, c + size].
          const auto x0 = static_cast<std::int64_t>(std::ceil(s->cx(f) - s->size - 0.5));
          const auto x1 = static_cast<std::int64_t>(std::floor(s->cx(f) + s->size - 0.5));
          const auto y0 = static_cast<std::int64_t>(std::ceil(s->cy(f) - s->size - 0.5));
          const auto y1 = static_cast<std::int64_t>(std::floor(s->cy(f) + s->size - 0.5));
          for (auto y = std::max<std::int64_t>(y0, 0); y <= std::min(y1, h - 1); ++y) {
            for (auto x = std::max<std::int64_t>(x0, 0); x <= std::min(x1, w - 1); ++x) {
              if (x != x0 && x != x1 && y != y0 && y != y1) continue;
              std::copy_n(s->color.data(), 3, out.ptr() + 3 * ((f * h + y) * w + x));
            }
          }
        }
      }
      return out;
    }
    case ConditionKind::scribble: {
      std::vector<float> g(pixels);
      for (std::size_t p = 0; p < pixels; ++p) g[p] = luma(p);
      auto at = [&](std::int64_t f, std::int64_t y, std::int64_t x) {
        y = std::clamp<std::int64_t>(y, 0, h - 1);
        x = std::clamp<std::int64_t>(x, 0, w - 1);
        return g[static_cast<std::size_t>((f * h + y) * w + x)];
      };
      for (std::int64_t f = 0; f < n; ++f) {
        for (std::int64_t y = 0; y < h; ++y) {
          for (std::int64_t x = 0; x < w; ++x) {
            const float gx = at(f, y - 1, x + 1) + 2 * at(f, y, x + 1) + at(f, y + 1, x + 1) - at(f, y - 1, x - 1) -
                             2 * at(f, y, x - 1) - at(f, y + 1, x - 1);
            const float gy = at(f, y + 1, x - 1) + 2 * at(f, y + 1, x) + at(f, y + 1, x + 1) - at(f, y - 1, x - 1) -
                             2 * at(f, y - 1, x) - at(f, y - 1, x + 1);
            const float v = std::sqrt(gx * gx + gy * gy) / 8.0f > 0.2f ? 1.0f : -1.0f;
            std::fill_n(out.ptr() + 3 * ((f * h + y) * w + x), 3, v);
          }
        }
      }
      return out;
    }
    case ConditionKind::depth_proxy:
    case ConditionKind::flow: {
      const auto top = topmost_index(scene, n, h, w);
      for (std::size_t p = 0; p < pixels; ++p) {
        const SceneShape* s = top[p] >= 0 ? &scene.shapes[static_cast<std::size_t>(top[p])] : nullptr;
        if (kind == ConditionKind::depth_proxy) {
          const float v = s ? std::min(1.0f, -1.0f + 0.5f * static_cast<float>(s->z + 1)) : -1.0f;
          std::fill_n(out.ptr() + 3 * p, 3, v);
        } else if (s) {
          const double sat = std::min(std::hypot(s->vx, s->vy) / (2.0 * std::numbers::sqrt2), 1.0);
          const double a = std::atan2(s->vy, s->vx);
          constexpr double third = 2.0 * std::numbers::pi / 3.0;
          out[3 * p] = static_cast<float>(sat * std::cos(a));
          out[3 * p + 1] = static_cast<float>(sat * std::cos(a - third));
          out[3 * p + 2] = static_cast<float>(sat * std::cos(a + third));
        }
      }
      return out;
    }
  }
  throw ArgumentError("condition: unknown kind");
}

MaskSeq dilate(const MaskSeq& masks, std::int64_t radius) {
  if (masks.rank() != 3) throw DimensionError("dilate: masks must be (n, h, w)");
  if (radius < 0) throw ArgumentError("dilate: negative radius");
  if (radius == 0) return masks;
  const auto n = masks.dim(0), h = masks.dim(1), w = masks.dim(2);
  MaskSeq out({n, h, w});
  for (std::int64_t f = 0; f < n; ++f) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        if (masks[static_cast<std::size_t>((f * h + y) * w + x)] == 0.0f) continue;
        for (auto yy = std::max<std::int64_t>(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) {
          for (auto xx = std::max<std::int64_t>(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
            out[static_cast<std::size_t>((f * h + yy) * w + xx)] = 1.0f;
          }
        }
      }
    }
  }
  return out;
}

MaskSeq random_mask(Rng& rng, const Scene& scene, std::int64_t n, std::int64_t h, std::int64_t w, MaskStyle style) {
  check_dims(n, h, w, "random_mask");
  MaskSeq out({n, h, w});
  const double area = static_cast<double>(h * w);
  // Rectangle with area fraction in [lo, hi] (up to integer rounding), returned as (x0, y0, rw, rh).
  auto rect = [&](double lo, double hi) {
    const double frac = rng.uniform(lo, hi);
    const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    auto rw = std::clamp<std::int64_t>(std::llround(std::sqrt(frac * area * aspect)), 1, w);
    auto rh = std::clamp<std::int64_t>(std::llround(frac * area / static_cast<double>(rw)), 1, h);
    rw = std::clamp<std::int64_t>(std::llround(frac * area / static_cast<double>(rh)), 1, w);
    return std::array<std::int64_t, 4>{rng.uniform_int(0, w - rw), rng.uniform_int(0, h - rh), rw, rh};
  };
  auto paint = [&](std::int64_t f, std::int64_t x0, std::int64_t y0, std::int64_t rw, std::int64_t rh) {
    for (auto y = std::max<std::int64_t>(0, y0); y < std::min(h, y0 + rh); ++y) {
      for (auto x = std::max<std::int64_t>(0, x0); x < std::min(w, x0 + rw); ++x) {
        out[static_cast<std::size_t>((f * h + y) * w + x)] = 1.0f;
      }
    }
  };
  switch (style) {
    case MaskStyle::instance_follow: {
      if (scene.shapes.empty()) throw ArgumentError("random_mask: instance_follow needs a shape");
      const auto i = rng.uniform_int(0, static_cast<std::int64_t>(scene.shapes.size()) - 1);
      const auto radius = rng.uniform_int(0, 3);
      return dilate(shape_support(scene.shapes[static_cast<std::size_t>(i)], n, h, w), radius);
    }
    case MaskStyle::static_rect: {
      // Rounding can push the area outside the band on tiny canvases; retry, then fall back to half the frame.
      std::array<std::int64_t, 4> r{0, 0, std::max<std::int64_t>(1, w / 2), h};
      for (int attempt = 0; attempt < 64; ++attempt) {
        const auto c = rect(0.1, 0.6);
        const double a = static_cast<double>(c[2] * c[3]);
        if (a >= 0.1 * area && a <= 0.6 * area) {
          r = c;
          break;
        }
      }
      for (std::int64_t f = 0; f < n; ++f) paint(f, r[0], r[1], r[2], r[3]);
      return out;
    }
    case MaskStyle::augmented: {
      const auto count = rng.uniform_int(1, 3);
      for (std::int64_t k = 0; k < count; ++k) {
        const auto r = rect(0.05, 0.25);
        for (std::int64_t f = 0; f < n; ++f) {
          paint(f, r[0] + rng.uniform_int(-2, 2), r[1] + rng.uniform_int(-2, 2), r[2], r[3]);
        }
      }
      return out;
    }
  }
  throw ArgumentError("random_mask: unknown style");
}

const char* sample_task_name(SampleTask task) {
  switch (task) {
    case SampleTask::t2v: return "t2v";
    case SampleTask::r2v_object: return "r2v_object";
    case SampleTask::v2v_gray: return "v2v_gray";
    case SampleTask::v2v_layout: return "v2v_layout";
    case SampleTask::v2v_scribble: return "v2v_scribble";
    case SampleTask::v2v_depth: return "v2v_depth";
    case SampleTask::v2v_flow: return "v2v_flow";
    case SampleTask::mv2v_inpaint: return "mv2v_inpaint";
    case SampleTask::mv2v_outpaint: return "mv2v_outpaint";
    case SampleTask::extension_first: return "extension_first";
    case SampleTask::extension_ends: return "extension_ends";
    case SampleTask::extension_random: return "extension_random";
    case SampleTask::composite: return "composite";
  }
  return "unknown";
}

const std::vector<SampleTask>& all_sample_tasks() {
  static const std::vector<SampleTask> all = [] {
    std::vector<SampleTask> v;
    for (int i = 0; i <= static_cast<int>(SampleTask::composite); ++i) v.push_back(static_cast<SampleTask>(i));
    return v;
  }();
  return all;
}

SampleTask parse_sample_task(const std::string& name) {
  for (auto t : all_sample_tasks()) {
    if (name == sample_task_name(t)) return t;
  }
  throw ArgumentError("unknown task '" + name + "'");
}

std::string describe(const Scene& scene) {
  if (scene.shapes.empty()) return "an empty scene";
  auto order = by_depth(scene);
  std::reverse(order.begin(), order.end());
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) out += i + 1 == order.size() ? " and " : ", ";
    out += std::string("a ") + color_name(order[i]->color) + " " + shape_kind_name(order[i]->kind) + " " +
           motion_word(*order[i]);
  }
  return out;
}

TrainSample make_sample(SampleTask task, std::uint64_t seed, const Geometry& geo) {
  if (static_cast<int>(task) > static_cast<int>(SampleTask::composite)) {
    throw ArgumentError("make_sample: unknown task");
  }
  const auto d = draw(seed, geo);
  TrainSample s;
  s.vcu = task == SampleTask::composite ? compose(random_recipe(seed), seed, d, geo) : build(task, seed, d, geo);
  s.target = d.target;
  s.task = task;
  s.seed = seed;
  return s;
}

TrainSample make_composite(const CompositeRecipe& recipe, std::uint64_t seed, const Geometry& geo) {
  const auto d = draw(seed, geo);
  TrainSample s;
  s.vcu = compose(recipe, seed, d, geo);
  s.target = d.target;
  s.task = SampleTask::composite;
  s.seed = seed;
  return s;
}

std::uint8_t encode_pixel(float x) {
  const double v = std::round((static_cast<double>(x) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

float decode_pixel(std::uint8_t code) {
  if (code == 128) return 0.0f;
  return static_cast<float>(static_cast<double>(code) / 127.5 - 1.0);
}

FrameSeq quantize(const FrameSeq& frames) {
  FrameSeq out = frames;
  for (auto& v : out.data()) v = decode_pixel(encode_pixel(v));
  return out;
}

std::vector<TrainSample> generate(const std::vector<SampleTask>& tasks, std::int64_t count, std::uint64_t seed,
                                  const Geometry& geo) {
  if (count < 0) throw ArgumentError("generate: negative count");
  if (count > 0 && tasks.empty()) throw ArgumentError("generate: no tasks");
  std::vector<TrainSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    out.push_back(make_sample(tasks[static_cast<std::size_t>(i) % tasks.size()],
                              Rng::derive_seed(seed, static_cast<std::uint64_t>(i)), geo));
  }
  return out;
}

std::vector<std::uint8_t> encode_record(const TrainSample& sample) {
  const Vcu& v = sample.vcu;
  const auto h = v.height(), w = v.width();
  const auto frames = v.ref_count + v.video_len;
  if (v.frames.rank() != 4 || v.frames.dim(0) != frames || v.masks.rank() != 3 ||
      sample.target.shape() != Shape{v.video_len, h, w, 3}) {
    throw DimensionError("encode_record: inconsistent sample shapes");
  }
  std::vector<std::uint8_t> out = {'V', 'C', 'U', '1'};
  put_u32(out, v.task_tag.encode());
  for (auto e : {v.ref_count, v.video_len, h, w}) put_u32(out, static_cast<std::uint32_t>(e));
  put_u32(out, static_cast<std::uint32_t>(v.prompt.size()));
  out.insert(out.end(), v.prompt.begin(), v.prompt.end());
  for (auto x : v.frames.data()) out.push_back(encode_pixel(x));
  for (auto x : sample.target.data()) out.push_back(encode_pixel(x));
  const auto bits = v.masks.size();
  const auto base = out.size();
  out.resize(base + (bits + 7) / 8, 0);
  for (std::size_t i = 0; i < bits; ++i) {
    const float m = v.masks[i];
    if (m != 0.0f && m != 1.0f) throw ValueError("encode_record: mask is not binary");
    if (m != 0.0f) out[base + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  return out;
}

TrainSample decode_record(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(4, "magic"), "VCU1", 4) != 0) throw ParseError("bad record magic", 0);
  const auto tag_pos = r.pos();
  const auto tag_code = r.u32("task tag");
  TrainSample s;
  try {
    s.vcu.task_tag = TaskTag::decode(tag_code);
  } catch (const std::exception& e) {
    throw ParseError(std::string("bad task tag: ") + e.what(), tag_pos);
  }
  std::int64_t dims[4];
  for (auto& d : dims) {
    const auto pos = r.pos();
    d = r.u32("header");
    if (d > kMaxExtent) throw ParseError("extent out of range", pos);
  }
  const auto [l, n, h, w] = dims;
  if (n == 0 || h == 0 || w == 0) throw ParseError("empty video extent", r.pos() - 4);
  const auto plen = r.u32("prompt length");
  const auto* p = r.take(plen, "prompt");
  s.vcu.prompt.assign(reinterpret_cast<const char*>(p), plen);
  s.vcu.ref_count = l;
  s.vcu.video_len = n;
  s.vcu.frames = FrameSeq({l + n, h, w, 3});
  s.target = FrameSeq({n, h, w, 3});
  s.vcu.masks = MaskSeq({l + n, h, w});
  const auto* fb = r.take(s.vcu.frames.size(), "frames");
  for (std::size_t i = 0; i < s.vcu.frames.size(); ++i) s.vcu.frames[i] = decode_pixel(fb[i]);
  const auto* tb = r.take(s.target.size(), "target");
  for (std::size_t i = 0; i < s.target.size(); ++i) s.target[i] = decode_pixel(tb[i]);
  const auto bits = s.vcu.masks.size();
  const auto* mb = r.take((bits + 7) / 8, "masks");
  for (std::size_t i = 0; i < bits; ++i) s.vcu.masks[i] = (mb[i / 8] >> (i % 8)) & 1u ? 1.0f : 0.0f;
  if (!r.done()) throw ParseError("trailing bytes after record", r.pos());
  return s;
}

void write_dataset(const std::vector<TrainSample>& samples, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream manifest;
  manifest << "vace-dataset 1\n";
  manifest << "count " << samples.size() << "\n";
  if (samples.empty()) {
    manifest << "geometry 0 0 0\n";
  } else {
    const auto& v = samples.front().vcu;
    manifest << "geometry " << v.video_len << " " << v.height() << " " << v.width() << "\n";
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto name = record_name(i);
    const auto bytes = encode_record(samples[i]);
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + (dir / name).string());
    manifest << "sample " << i << " " << name << " " << sample_task_name(samples[i].task) << " " << samples[i].seed
             << "\n";
  }
  std::ofstream out(dir / "manifest", std::ios::trunc);
  out << manifest.str();
  if (!out) throw IoError("cannot write " + (dir / "manifest").string());
}

std::vector<TrainSample> read_dataset(const std::filesystem::path& dir) {
  const auto raw = read_file(dir / "manifest");
  const std::string text(raw.begin(), raw.end());
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(std::string("manifest: missing ") + what, offset);
    const auto at = offset;
    offset += line.size() + 1;
    return at;
  };
  std::string key;
  auto at = next("header");
  int version = 0;
  if (!(std::istringstream(line) >> key >> version) || key != "vace-dataset") {
    throw ParseError("manifest: bad header", at);
  }
  if (version != 1) throw IncompatibleVersionError("dataset version " + std::to_string(version) + " unsupported");
  std::size_t count = 0;
  at = next("count");
  if (!(std::istringstream(line) >> key >> count) || key != "count") throw ParseError("manifest: bad count", at);
  at = next("geometry");
  std::int64_t gn, gh, gw;
  if (!(std::istringstream(line) >> key >> gn >> gh >> gw) || key != "geometry") {
    throw ParseError("manifest: bad geometry", at);
  }
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    at = next("sample line");
    std::size_t index;
    std::string file, task;
    std::uint64_t seed;
    if (!(std::istringstream(line) >> key >> index >> file >> task >> seed) || key != "sample" || index != i ||
        file.find('/') != std::string::npos) {
      throw ParseError("manifest: bad sample line", at);
    }
    TrainSample s;
    try {
      s = decode_record(read_file(dir / file));
    } catch (const ParseError& e) {
      throw ParseError(file + ": " + e.message(), e.offset());
    }
    try {
      s.task = parse_sample_task(task);
    } catch (const ArgumentError&) {
      throw ParseError("manifest: unknown task '" + task + "'", at);
    }
    s.seed = seed;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace vace
