// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "vace/checks.hpp"
#include "vace/ops.hpp"
#include "vace/vcu.hpp"

namespace vace {
namespace {

double frame_mask_mean(const Vcu& v, std::int64_t f) {
  double s = 0.0;
  for (std::int64_t y = 0; y < v.height(); ++y)
    for (std::int64_t x = 0; x < v.width(); ++x) s += v.masks.at({f, y, x});
  return s / static_cast<double>(v.height() * v.width());
}

bool has_violation(const Vcu& v, const std::string& message) {
  for (const auto& e : validate(v)) {
    if (e.message == message) return true;
  }
  return false;
}

Tensor random_masks(Rng& rng, const Shape& s) {
  Tensor m(s);
  for (auto& v : m.data()) v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  return m;
}

TEST(MakeT2v, ZeroFramesAndAllOneMasks) {
  const auto v = make_t2v("a red circle", 4, 32, 32);
  EXPECT_EQ(v.frames.shape(), (Shape{4, 32, 32, 3}));
  EXPECT_EQ(v.ref_count, 0);
  EXPECT_EQ(v.video_len, 4);
  double abs_sum = 0.0, mask_sum = 0.0;
  for (float f : v.frames.data()) abs_sum += std::abs(f);
  for (float m : v.masks.data()) mask_sum += m;
  EXPECT_EQ(abs_sum, 0.0);
  EXPECT_EQ(mask_sum, 4.0 * 32 * 32);
  EXPECT_TRUE(validate(v).empty());
  EXPECT_THROW(make_t2v("p", 0, 4, 4), ArgumentError);
  EXPECT_THROW(make_t2v("p", 2, 0, 4), ArgumentError);
}

TEST(MakeR2v, ReferencesInFrontWithZeroMasks) {
  Rng rng(1);
  const auto refs = uniform(rng, {1, 8, 8, 3}, -1.0, 1.0);
  const auto v = make_r2v("p", refs, 4);
  ASSERT_EQ(v.frames.dim(0), 5);
  const std::vector<double> expect = {0, 1, 1, 1, 1};
  for (std::int64_t f = 0; f < 5; ++f) EXPECT_EQ(frame_mask_mean(v, f), expect[static_cast<std::size_t>(f)]);
  EXPECT_TRUE(ops::bitwise_equal(ops::slice(v.frames, 0, 0, 1), refs));
  EXPECT_THROW(make_r2v("p", Tensor({0, 8, 8, 3}), 2), ArgumentError);
}

TEST(MakeR2v, RefCountOverGrid) {
  Rng rng(2);
  for (std::int64_t l = 1; l <= 3; ++l) {
    for (std::int64_t n = 1; n <= 4; ++n) {
      const auto v = make_r2v("p", uniform(rng, {l, 4, 4, 3}, -1.0, 1.0), n);
      EXPECT_EQ(v.ref_count, l);
      for (std::int64_t f = 0; f < l; ++f) EXPECT_EQ(frame_mask_mean(v, f), 0.0);
    }
  }
}

TEST(MakeV2v, FramesBitIdenticalMasksAllOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto video = uniform(rng, {4, 8, 8, 3}, -1.0, 1.0);
    const auto v = make_v2v("p", video);
    EXPECT_TRUE(ops::bitwise_equal(v.frames, video));
    for (float m : v.masks.data()) ASSERT_EQ(m, 1.0f);
    EXPECT_TRUE(validate(v).empty());
  }
  EXPECT_THROW(make_v2v("p", Tensor({0, 8, 8, 3})), ArgumentError);
}

TEST(MakeMv2v, DegenerateMasks) {
  Rng rng(3);
  const auto video = uniform(rng, {3, 8, 8, 3}, -1.0, 1.0);
  const auto ones = make_mv2v("p", video, Tensor({3, 8, 8}, 1.0f));
  EXPECT_TRUE(same_layout(ones, make_v2v("p", video)));
  EXPECT_NE(ones.task_tag, make_v2v("p", video).task_tag);
  EXPECT_TRUE(validate(make_mv2v("p", video, Tensor({3, 8, 8}))).empty());
  for (int i = 0; i < 20; ++i) EXPECT_TRUE(validate(make_mv2v("p", video, random_masks(rng, {3, 8, 8}))).empty());
}

TEST(MakeMv2v, Errors) {
  Rng rng(4);
  const auto video = uniform(rng, {3, 8, 8, 3}, -1.0, 1.0);
  EXPECT_THROW(make_mv2v("p", video, Tensor({2, 8, 8})), DimensionError);
  EXPECT_THROW(make_mv2v("p", video, Tensor({3, 8, 4})), DimensionError);
  EXPECT_THROW(make_mv2v("p", video, Tensor({3, 8, 8}, 0.5f)), ValueError);
}

TEST(WithReferences, PrependsZeroMasks) {
  Rng rng(5);
  const auto masks = random_masks(rng, {3, 4, 4});
  const auto base = make_mv2v("p", uniform(rng, {3, 4, 4, 3}, -1.0, 1.0), masks);
  const auto v = with_references(base, uniform(rng, {2, 4, 4, 3}, -1.0, 1.0));
  EXPECT_EQ(v.ref_count, 2);
  EXPECT_EQ(v.task_tag.kind, TaskKind::composite);
  EXPECT_TRUE(ops::bitwise_equal(ops::slice(v.masks, 0, 0, 2), Tensor({2, 4, 4})));
  EXPECT_TRUE(ops::bitwise_equal(ops::slice(v.masks, 0, 2, 5), masks));
  EXPECT_THROW(with_references(base, Tensor({1, 4, 8, 3})), DimensionError);
}

TEST(WithReferences, T2vPlusRefsIsR2v) {
  Rng rng(6);
  for (std::int64_t l = 1; l <= 3; ++l) {
    const auto refs = uniform(rng, {l, 4, 4, 3}, -1.0, 1.0);
    EXPECT_TRUE(same_layout(with_references(make_t2v("p", 3, 4, 4), refs), make_r2v("p", refs, 3)));
  }
}

TEST(WithReferences, ComposingTwiceStacksReferences) {
  Rng rng(7);
  for (std::int64_t l1 = 1; l1 <= 2; ++l1) {
    for (std::int64_t l2 = 1; l2 <= 2; ++l2) {
      const auto r1 = uniform(rng, {l1, 4, 4, 3}, -1.0, 1.0);
      const auto r2 = uniform(rng, {l2, 4, 4, 3}, -1.0, 1.0);
      const auto v = with_references(with_references(make_v2v("p", uniform(rng, {2, 4, 4, 3}, -1.0, 1.0)), r1), r2);
      EXPECT_EQ(v.ref_count, l1 + l2);
      for (std::int64_t f = 0; f < l1 + l2; ++f) EXPECT_EQ(frame_mask_mean(v, f), 0.0);
      // The newest references go in front.
      EXPECT_TRUE(ops::bitwise_equal(ops::slice(v.frames, 0, 0, l2), r2));
      EXPECT_TRUE(validate(v).empty());
    }
  }
}

TEST(FrameAnchored, ConditionModeRepaintsEverything) {
  Rng rng(8);
  const auto u = uniform(rng, {4, 4, 3}, -1.0, 1.0);
  const auto v = make_frame_anchored("p", {{0, u}}, 4, 4, 4, true);
  for (float m : v.masks.data()) ASSERT_EQ(m, 1.0f);
  EXPECT_TRUE(ops::bitwise_equal(ops::slice(v.frames, 0, 0, 1), u.reshaped({1, 4, 4, 3})));
  EXPECT_TRUE(ops::bitwise_equal(ops::slice(v.frames, 0, 1, 4), Tensor({3, 4, 4, 3})));
}

TEST(FrameAnchored, KeepModeZeroesAnchorMasks) {
  Rng rng(9);
  const auto a = uniform(rng, {4, 4, 3}, -1.0, 1.0);
  const auto b = uniform(rng, {4, 4, 3}, -1.0, 1.0);
  const auto v = make_frame_anchored("p", {{0, a}, {5, b}}, 6, 4, 4, false);
  const std::vector<double> expect = {0, 1, 1, 1, 1, 0};
  for (std::int64_t f = 0; f < 6; ++f) EXPECT_EQ(frame_mask_mean(v, f), expect[static_cast<std::size_t>(f)]);

  const auto one = make_frame_anchored("p", {{0, a}}, 1, 4, 4, false);
  EXPECT_EQ(frame_mask_mean(one, 0), 0.0);
  EXPECT_TRUE(ops::bitwise_equal(one.frames, a.reshaped({1, 4, 4, 3})));
}

TEST(FrameAnchored, Errors) {
  const Tensor f({4, 4, 3});
  EXPECT_THROW(make_frame_anchored("p", {{0, f}, {0, f}}, 4, 4, 4, false), ArgumentError);
  EXPECT_THROW(make_frame_anchored("p", {{4, f}}, 4, 4, 4, false), ArgumentError);
  EXPECT_THROW(make_frame_anchored("p", {{-1, f}}, 4, 4, 4, false), ArgumentError);
}

TEST(Validate, ReportsEveryViolation) {
  Rng rng(10);
  auto v = make_r2v("p", uniform(rng, {1, 4, 4, 3}, -1.0, 1.0), 2);
  v.masks.at({0, 1, 1}) = 1.0f;
  EXPECT_TRUE(has_violation(v, "reference mask must be zero"));
  v.masks.at({2, 0, 0}) = 0.5f;
  EXPECT_TRUE(has_violation(v, "mask not binary"));
  EXPECT_GE(validate(v).size(), 2u);
  for (const auto& e : validate(v)) EXPECT_FALSE(e.path.empty());
}

TEST(Validate, BuildersUnderRandomInputs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto n = rng.uniform_int(1, 6), h = rng.uniform_int(1, 9), w = rng.uniform_int(1, 9);
    const auto video = uniform(rng, {n, h, w, 3}, -1.0, 1.0);
    const auto refs = uniform(rng, {rng.uniform_int(1, 3), h, w, 3}, -1.0, 1.0);
    for (const auto& v : {make_t2v("p", n, h, w), make_r2v("p", refs, n), make_v2v("p", video),
                          make_mv2v("p", video, random_masks(rng, {n, h, w})), with_references(make_v2v("p", video), refs)}) {
      EXPECT_TRUE(validate(v).empty()) << v.task_tag.name();
    }
  }
}

TEST(TaskTag, EncodeDecodeRoundtrip) {
  const TaskTag composite{TaskKind::composite, {TaskKind::v2v, TaskKind::mv2v, TaskKind::r2v}};
  EXPECT_EQ(TaskTag::decode(composite.encode()), composite);
  for (auto k : {TaskKind::t2v, TaskKind::r2v, TaskKind::v2v, TaskKind::mv2v}) {
    EXPECT_EQ(TaskTag::decode(TaskTag{k, {}}.encode()), (TaskTag{k, {}}));
  }
  EXPECT_THROW(TaskTag::decode(0xf), ValueError);
}

// The acceptance check, as a unit test.
TEST(VcuAlgebra, BruteForceLayouts) {
  const auto r = checks::vcu_algebra();
  EXPECT_TRUE(r.passed) << r.detail;
}

}  // namespace
}  // namespace vace
