// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "vace/checks.hpp"
#include "vace/ops.hpp"
#include "vace/train.hpp"

namespace vace {
namespace {

const Geometry kSmall{4, 16, 16, 1, 2};

ModelConfig small_model(ModelMode mode) {
  auto cfg = checks::tiny_config(mode);
  cfg.placement = PlacementSpec::distributed_even(1);
  return cfg;
}

TrainConfig short_run(std::int64_t steps) {
  TrainConfig tc;
  tc.steps = steps;
  tc.batch_size = 2;
  tc.learning_rate = 1e-3;
  tc.seed = 5;
  return tc;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.names() != b.names()) return false;
  for (const auto& [name, p] : a) {
    if (!ops::bitwise_equal(p.value, b.at(name).value)) return false;
  }
  return true;
}

TEST(ShiftTime, Examples) {
  EXPECT_DOUBLE_EQ(shift_time(0.5, 3.0), 0.75);
  for (double u : {0.01, 0.3, 0.5, 0.99}) EXPECT_DOUBLE_EQ(shift_time(u, 1.0), u);
  EXPECT_LT(shift_time(1e-12, 3.0), 1e-11);
  EXPECT_GT(shift_time(1.0 - 1e-12, 3.0), 1.0 - 1e-11);
  EXPECT_THROW(shift_time(0.0, 3.0), ArgumentError);
  EXPECT_THROW(shift_time(1.0, 3.0), ArgumentError);
  EXPECT_THROW(shift_time(0.5, 0.5), ArgumentError);
}

TEST(ShiftTime, MonotoneBijectionWithInverse) {
  for (double s : {1.0, 1.5, 3.0, 10.0}) {
    double prev = 0.0;
    for (int i = 1; i < 1000; ++i) {
      const double u = i / 1000.0;
      const double t = shift_time(u, s);
      EXPECT_GT(t, prev);
      EXPECT_LT(t, 1.0);
      prev = t;
      // The same map with parameter 1/s inverts it.
      const double r = 1.0 / s;
      EXPECT_NEAR(r * t / (1.0 + (r - 1.0) * t), u, 1e-6);
    }
  }
}

TEST(FlowPair, EndpointsAndAlgebra) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto x0 = uniform(rng, {3, 4, 5}, -1.0, 1.0);
    const auto eps = normal(rng, {3, 4, 5});
    EXPECT_TRUE(ops::bitwise_equal(flow_pair(x0, eps, 0.0f).x_t, x0));
    EXPECT_TRUE(ops::bitwise_equal(flow_pair(x0, eps, 1.0f).x_t, eps));
    const auto t = static_cast<float>(rng.uniform());
    const auto fp = flow_pair(x0, eps, t);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      EXPECT_NEAR(fp.x_t[i] - t * fp.v_target[i], x0[i], 1e-5);
      EXPECT_NEAR(fp.x_t[i] + (1.0f - t) * fp.v_target[i], eps[i], 1e-5);
    }
  }
  EXPECT_THROW(flow_pair(Tensor({2, 3}), Tensor({3, 2}), 0.5f), DimensionError);
}

TEST(Loss, ZeroModelEqualsSecondMomentOfTarget) {
  const auto cfg = small_model(ModelMode::adapter);
  const auto params = init_params(cfg, 1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto sample = make_sample(SampleTask::mv2v_inpaint, seed, kSmall);
    const auto prep = prepare_sample(sample, cfg);
    Rng rng(seed);
    const auto eps = normal(rng, prep.x0.shape());
    const auto fp = flow_pair(prep.x0, eps, 0.4f);
    const auto in = make_input(cfg, fp.x_t, prep.bundle, prep.text_ids, 0.4f);
    double second = 0.0;
    for (float v : fp.v_target.data()) second += double(v) * v;
    second /= static_cast<double>(fp.v_target.size());
    EXPECT_NEAR(loss_only(params, cfg, in, patch_rows<float>(fp.v_target, cfg)), second, 1e-6 * second);
  }
}

TEST(Format, LossRecordSixSignificantDigits) {
  EXPECT_EQ(format_loss_record({12, TaskTag{TaskKind::mv2v, {}}, 0.123456789}), "12\tMV2V\t0.123457");
  EXPECT_EQ(format_loss_record({0, TaskTag{TaskKind::t2v, {}}, 2.0}), "0\tT2V\t2");
}

TEST(TrainState, MomentsExactlyForTrainable) {
  for (auto mode : {ModelMode::fullft, ModelMode::adapter}) {
    const auto cfg = small_model(mode);
    const auto st = TrainState::start(init_params(cfg, 2), 3);
    const auto mask = trainable_mask(cfg);
    EXPECT_EQ(st.moments.size(), mask.size());
    for (const auto& [name, m] : st.moments) {
      EXPECT_EQ(mask.count(name), 1u);
      EXPECT_EQ(m.m.size(), st.params.at(name).value.size());
    }
  }
}

TEST(TrainStep, FrozenUntouchedAndOneRecordPerSample) {
  const auto cfg = small_model(ModelMode::adapter);
  auto params = init_params(cfg, 4);
  Rng rng(5);
  checks::jitter(params, rng, 0.05);
  auto st = TrainState::start(params, 6);
  const auto batch = generate({SampleTask::mv2v_inpaint, SampleTask::v2v_gray, SampleTask::r2v_object}, 3, 7, kSmall);
  const double loss = train_step(st, cfg, short_run(1), batch);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_EQ(st.step, 1);
  ASSERT_EQ(st.log.size(), 3u);
  for (const auto& r : st.log) EXPECT_EQ(r.step, 0);
  EXPECT_EQ(st.log[0].task.kind, TaskKind::mv2v);
  bool moved = false;
  for (const auto& [name, p] : st.params) {
    if (!p.trainable) EXPECT_TRUE(ops::bitwise_equal(p.value, params.at(name).value)) << name;
    else moved = moved || !ops::bitwise_equal(p.value, params.at(name).value);
  }
  EXPECT_TRUE(moved);
}

// With a frozen zero final projection no gradient reaches the adapter, so a
// step applies weight decay alone: p <- p (1 - lr wd).
TEST(TrainStep, DecoupledWeightDecayOnAllTrainable) {
  const auto cfg = small_model(ModelMode::adapter);
  const auto params = init_params(cfg, 8);
  auto st = TrainState::start(params, 9);
  auto tc = short_run(1);
  tc.weight_decay = 0.5;
  train_step(st, cfg, tc, generate({SampleTask::mv2v_inpaint}, 2, 10, kSmall));
  const float decay = static_cast<float>(1.0 - tc.learning_rate * tc.weight_decay);
  for (const auto& [name, p] : st.params) {
    const auto& before = params.at(name).value;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const float want = p.trainable ? before[i] * decay : before[i];
      ASSERT_EQ(p.value[i], want) << name;
    }
  }
}

TEST(TrainStep, InvalidSampleAbortsOrSkips) {
  const auto cfg = small_model(ModelMode::fullft);
  auto batch = generate({SampleTask::mv2v_inpaint}, 2, 11, kSmall);
  batch[1].vcu.masks.at({0, 0, 0}) = 0.5f;
  auto st = TrainState::start(init_params(cfg, 12), 13);
  EXPECT_ANY_THROW(train_step(st, cfg, short_run(1), batch));

  auto tc = short_run(1);
  tc.skip_invalid = true;
  auto st2 = TrainState::start(init_params(cfg, 12), 13);
  EXPECT_TRUE(std::isfinite(train_step(st2, cfg, tc, batch)));
  EXPECT_EQ(st2.skipped.size(), 1u);
  EXPECT_EQ(st2.log.size(), 1u);
}

TEST(Fit, ZeroStepsReturnsInitialization) {
  const auto cfg = small_model(ModelMode::adapter);
  const auto init = init_params(cfg, 14);
  const auto data = generate({SampleTask::mv2v_inpaint}, 4, 15, kSmall);
  const auto r = fit(cfg, short_run(0), init, data, data);
  EXPECT_TRUE(same_params(r.state.params, init));
  EXPECT_TRUE(r.state.log.empty());
  ASSERT_EQ(r.evals.size(), 1u);
  EXPECT_EQ(r.evals[0].step, 0);
}

TEST(Fit, DeterministicLogsAndBookkeeping) {
  const auto cfg = small_model(ModelMode::fullft);
  auto init = init_params(cfg, 16);
  Rng rng(17);
  checks::jitter(init, rng, 0.05);
  const auto train = generate({SampleTask::mv2v_inpaint, SampleTask::t2v, SampleTask::v2v_depth}, 6, 18, kSmall);
  const auto val = generate({SampleTask::mv2v_inpaint, SampleTask::t2v}, 2, 19, kSmall);
  auto tc = short_run(6);
  tc.eval_every = 3;
  const auto a = fit(cfg, tc, init, train, val);
  const auto b = fit(cfg, tc, init, train, val);
  ASSERT_EQ(a.state.log.size(), 12u);
  for (std::size_t i = 0; i < a.state.log.size(); ++i) {
    EXPECT_EQ(a.state.log[i].step, static_cast<std::int64_t>(i / 2));
    EXPECT_EQ(a.state.log[i].loss, b.state.log[i].loss);
    EXPECT_EQ(a.state.log[i].task, b.state.log[i].task);
  }
  EXPECT_TRUE(same_params(a.state.params, b.state.params));
  EXPECT_EQ(a.data_digest, b.data_digest);
  ASSERT_EQ(a.evals.size(), 3u);
  EXPECT_EQ(a.evals[1].step, 3);
  EXPECT_EQ(a.evals[2].step, 6);
  EXPECT_EQ(a.evals[0].per_task.size(), 2u);

  // Another training seed draws another stream.
  tc.seed = 99;
  EXPECT_NE(fit(cfg, tc, init, train, val).data_digest, a.data_digest);
}

TEST(Fit, DataDigestIgnoresModelConfig) {
  const auto train = generate({SampleTask::mv2v_inpaint}, 4, 20, kSmall);
  const auto tc = short_run(2);
  const auto on = small_model(ModelMode::adapter);
  auto off = on;
  off.decouple = false;
  EXPECT_EQ(fit(on, tc, init_params(on, 1), train, train).data_digest,
            fit(off, tc, init_params(off, 1), train, train).data_digest);
}

TEST(Fit, LossDecreasesOnTinyProblem) {
  const auto cfg = small_model(ModelMode::fullft);
  const auto train = generate({SampleTask::mv2v_inpaint}, 4, 21, kSmall);
  auto tc = short_run(60);
  tc.learning_rate = 3e-3;
  const auto r = fit(cfg, tc, init_params(cfg, 22), train, train);
  EXPECT_LT(r.evals.back().mean_loss, r.evals.front().mean_loss);
}

TEST(ValidationLoss, RepeatableAndPerTask) {
  const auto cfg = small_model(ModelMode::adapter);
  auto params = init_params(cfg, 23);
  Rng rng(24);
  checks::jitter(params, rng, 0.05);
  const auto val = generate({SampleTask::mv2v_inpaint, SampleTask::v2v_gray}, 4, 25, kSmall);
  const auto a = evaluate_loss(params, cfg, val), b = evaluate_loss(params, cfg, val);
  EXPECT_EQ(a.mean_loss, b.mean_loss);
  ASSERT_EQ(a.per_task.size(), 2u);
  EXPECT_NEAR(a.mean_loss, (a.per_task.at("mv2v_inpaint") + a.per_task.at("v2v_gray")) / 2.0, 1e-12);
}

TEST(TrainConfig, Validation) {
  TrainConfig tc;
  EXPECT_NO_THROW(tc.check());
  tc.p_zero = 1.5;
  EXPECT_THROW(tc.check(), ConfigError);
  tc = {};
  tc.shift = 0.9;
  EXPECT_THROW(tc.check(), ConfigError);
  tc = {};
  tc.learning_rate = 0.0;
  EXPECT_THROW(tc.check(), ConfigError);
}

TEST(Digest, Fnv1aKnownValue) {
  Digest d;
  d.update("foobar", 6);
  EXPECT_EQ(d.value(), 0x85944171f73967e8ULL);
  EXPECT_EQ(d.hex(), "85944171f73967e8");
}

}  // namespace
}  // namespace vace
