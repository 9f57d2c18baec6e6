// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "vace/ablate.hpp"
#include "vace/checkpoint.hpp"
#include "vace/checks.hpp"
#include "vace/config.hpp"
#include "vace/errors.hpp"
#include "vace/eval.hpp"
#include "vace/ops.hpp"

namespace vace {
namespace {

namespace fs = std::filesystem;

const Geometry kSmall{4, 16, 16, 1, 2};

ModelConfig small_model(ModelMode mode = ModelMode::adapter) {
  auto cfg = checks::tiny_config(mode);
  cfg.placement = PlacementSpec::distributed_even(1);
  return cfg;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("vace_harness_test_" + name);
  fs::remove_all(d);
  return d;
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.model = small_model();
  c.model.placement = PlacementSpec::explicit_list({1});
  c.train.learning_rate = 3e-4;
  c.train.seed = 77;
  c.params = init_params(c.model, 1);
  Rng rng(2);
  checks::jitter(c.params, rng, 0.1);
  c.step = 42;
  c.rng = Rng(9);
  c.rng.next_u64();
  return c;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

// ------------------------------------------------------------- checkpoints

TEST(Checkpoint, RoundtripIsBitwise) {
  const auto dir = temp_dir("roundtrip");
  const auto c = sample_checkpoint();
  save_checkpoint(c, dir);
  const auto back = load_checkpoint(dir);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.train, c.train);
  EXPECT_EQ(back.step, 42);
  EXPECT_EQ(back.rng, c.rng);
  ASSERT_EQ(back.params.names(), c.params.names());
  for (const auto& [name, p] : c.params) {
    EXPECT_TRUE(ops::bitwise_equal(back.params.at(name).value, p.value)) << name;
    EXPECT_EQ(back.params.at(name).trainable, p.trainable) << name;
  }
  Rng rng(3);
  const auto in = checks::random_input(rng, c.model, 2, 1, 2, 2);
  EXPECT_TRUE(ops::bitwise_equal(forward(back.params, back.model, in), forward(c.params, c.model, in)));

  // Saving the loaded checkpoint reproduces the same files.
  const auto again = temp_dir("roundtrip2");
  save_checkpoint(back, again);
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream a(e.path(), std::ios::binary), b(again / fs::relative(e.path(), dir), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb) << e.path();
  }
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST(Checkpoint, MissingDirectory) {
  EXPECT_THROW(load_checkpoint(temp_dir("nothing_here")), IoError);
}

TEST(Checkpoint, TruncatedBufferNamesTheParameter) {
  const auto dir = temp_dir("truncated");
  save_checkpoint(sample_checkpoint(), dir);
  const auto file = dir / read_json(dir / "manifest.json")["params"][0]["file"].get<std::string>();
  const auto name = read_json(dir / "manifest.json")["params"][0]["name"].get<std::string>();
  fs::resize_file(file, fs::file_size(file) - 4);
  try {
    load_checkpoint(dir);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(name), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(Checkpoint, ManifestMissingAParameter) {
  const auto dir = temp_dir("unlisted");
  save_checkpoint(sample_checkpoint(), dir);
  auto m = read_json(dir / "manifest.json");
  m["params"].erase(m["params"].begin());
  write_json(dir / "manifest.json", m);
  EXPECT_THROW(load_checkpoint(dir), ParseError);
  fs::remove_all(dir);
}

TEST(Checkpoint, VersionMismatch) {
  const auto dir = temp_dir("version");
  save_checkpoint(sample_checkpoint(), dir);
  auto m = read_json(dir / "manifest.json");
  m["version"] = kCheckpointVersion + 1;
  write_json(dir / "manifest.json", m);
  EXPECT_THROW(load_checkpoint(dir), IncompatibleVersionError);
  fs::remove_all(dir);
}

TEST(Checkpoint, GarbageManifest) {
  const auto dir = temp_dir("garbage");
  save_checkpoint(sample_checkpoint(), dir);
  std::ofstream(dir / "manifest.json") << "{ not json";
  EXPECT_THROW(load_checkpoint(dir), ParseError);
  fs::remove_all(dir);
}

TEST(Checkpoint, ConfigJsonRoundtrip) {
  ModelConfig m;
  m.layers = 6;
  m.patch_h = m.patch_w = 1;
  m.placement = PlacementSpec::continuous_first(3);
  m.decouple = false;
  m.mode = ModelMode::fullft;
  EXPECT_EQ(model_config_from_json(to_json(m)), m);
  TrainConfig t;
  t.shift = 1.5;
  t.clip_norm = 2.0;
  t.skip_invalid = true;
  EXPECT_EQ(train_config_from_json(to_json(t)), t);
}

// -------------------------------------------------------------- evaluation

TEST(Metrics, PsnrCapAndValue) {
  const auto s = make_sample(SampleTask::mv2v_inpaint, 1, kSmall);
  EXPECT_EQ(psnr_inactive(s.vcu.frames, s.vcu), kPsnrCap);
  auto off = s.vcu.frames;
  for (auto& v : off.data()) v += 0.1f;
  // Uniform error 0.1 on kept pixels: 10 log10(4 / 0.01).
  EXPECT_NEAR(psnr_inactive(off, s.vcu), 10.0 * std::log10(400.0), 1e-4);
  const auto all_edit = make_t2v("p", 4, 16, 16);
  EXPECT_TRUE(std::isnan(psnr_inactive(all_edit.frames, all_edit)));
  EXPECT_THROW(psnr_inactive(Tensor({3, 16, 16, 3}), s.vcu), DimensionError);
}

TEST(Metrics, PsnrIgnoresReferencesAndEditedPixels) {
  const auto c = make_composite({SampleTask::mv2v_inpaint, true, std::nullopt}, 2, kSmall);
  const auto l = c.vcu.ref_count;
  auto video = ops::slice(c.vcu.frames, 0, l, l + 4);
  for (std::int64_t f = 0; f < 4; ++f)
    for (std::int64_t y = 0; y < 16; ++y)
      for (std::int64_t x = 0; x < 16; ++x)
        if (c.vcu.masks.at({l + f, y, x}) == 1.0f) video.at({f, y, x, 0}) = 0.7f;
  EXPECT_EQ(psnr_inactive(video, c.vcu), kPsnrCap);
}

TEST(Metrics, Flicker) {
  EXPECT_EQ(flicker(Tensor({5, 4, 4, 3}, 0.3f)), 0.0);
  EXPECT_EQ(flicker(Tensor({1, 4, 4, 3}, 0.3f)), 0.0);
  Tensor v({3, 2, 2, 3});
  for (std::int64_t f = 0; f < 3; ++f)
    for (std::int64_t i = 0; i < 12; ++i) v.data()[static_cast<std::size_t>(f * 12 + i)] = 0.25f * static_cast<float>(f);
  EXPECT_DOUBLE_EQ(flicker(v), 0.25);
}

TEST(Evaluate, ZeroModelLossIsSecondMomentOfTarget) {
  const auto cfg = small_model();
  const auto params = init_params(cfg, 3);
  const auto val = generate({SampleTask::mv2v_inpaint, SampleTask::r2v_object}, 4, 4, kSmall);
  EvalOptions eo;
  eo.samples_per_task = 0;
  const auto report = evaluate(params, cfg, val, eo);
  ASSERT_EQ(report.tasks.size(), 2u);
  std::map<std::string, double> want;
  for (const auto& s : val) {
    const auto prep = prepare_sample(s, cfg);
    const Rng root(Rng::derive_seed(s.seed, kProbeStream));
    double per_sample = 0.0;
    for (std::size_t j = 0; j < kProbeTimes.size(); ++j) {
      Rng rng = root.split(j);
      const auto noise = normal<float>(rng, prep.x0.shape());
      double sq = 0.0;
      for (std::size_t i = 0; i < noise.size(); ++i) {
        const double v = double(noise[i]) - prep.x0[i];
        sq += v * v;
      }
      per_sample += sq / static_cast<double>(noise.size());
    }
    want[sample_task_name(s.task)] += per_sample / 3.0 / 2.0;
  }
  for (const auto& t : report.tasks) {
    EXPECT_EQ(t.count, 2);
    EXPECT_NEAR(t.loss, want.at(t.task), 1e-5 * want.at(t.task)) << t.task;
  }
  EXPECT_EQ(report.sampled, 0);
}

TEST(Evaluate, DeterministicReportWithEveryTaskOnce) {
  const auto cfg = small_model();
  auto params = init_params(cfg, 5);
  Rng rng(6);
  checks::jitter(params, rng, 0.05);
  const auto val = generate({SampleTask::mv2v_inpaint, SampleTask::v2v_gray, SampleTask::mv2v_outpaint}, 6, 7, kSmall);
  EvalOptions eo;
  eo.samples_per_task = 1;
  eo.sampler.steps = 2;
  const auto a = evaluate(params, cfg, val, eo), b = evaluate(params, cfg, val, eo);
  EXPECT_EQ(a.tsv(), b.tsv());
  EXPECT_EQ(a.summary(), b.summary());
  ASSERT_EQ(a.tasks.size(), 3u);
  EXPECT_EQ(a.tasks[0].task, "mv2v_inpaint");
  EXPECT_EQ(a.tasks[1].task, "mv2v_outpaint");
  EXPECT_EQ(a.tasks[2].task, "v2v_gray");
  EXPECT_EQ(a.sampled, 3);
  EXPECT_EQ(a.psnr_count, 2);
  EXPECT_TRUE(a.tsv().starts_with("section\tkey\tcount\tvalue\n"));
  EXPECT_THROW(evaluate(params, cfg, {}, eo), ArgumentError);
}

// ------------------------------------------------------------------ config

TEST(Config, ParsesKeysCommentsAndBooleans) {
  const auto c = parse_config(
      "# toy run\n"
      "mode = fullft\n"
      "layers = 4   # shallower\n"
      "placement = continuous:2\n"
      "patch = 1, 1, 1\n"
      "decouple = off\n"
      "learning_rate = 3e-4\n"
      "steps = 100\n"
      "frames = 16\n"
      "guide = 1.5\n"
      "composite_inactive = true\n"
      "\n");
  EXPECT_EQ(c.model.mode, ModelMode::fullft);
  EXPECT_EQ(c.model.layers, 4);
  EXPECT_EQ(c.model.placement, PlacementSpec::continuous_first(2));
  EXPECT_EQ(c.model.patch_h, 1);
  EXPECT_FALSE(c.model.decouple);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 3e-4);
  EXPECT_EQ(c.train.steps, 100);
  EXPECT_EQ(c.geometry.n, 16);
  EXPECT_DOUBLE_EQ(c.sampler.guide, 1.5);
  EXPECT_TRUE(c.sampler.composite_inactive);
  EXPECT_EQ(parse_config("").model, ModelConfig{});
}

TEST(Config, ErrorsNameTheLine) {
  const auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("steps = 10\nbogus = 1\n").find("config line 2: unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(message("steps 10\n").find("config line 1"), std::string::npos);
  EXPECT_NE(message("steps = ten\n").find("config line 1: steps"), std::string::npos);
  EXPECT_NE(message("decouple = maybe\n").find("not a boolean"), std::string::npos);
  EXPECT_NE(message("patch = 1,2\n").find("three extents"), std::string::npos);
  EXPECT_NE(message("heads = 3\n").find("config:"), std::string::npos);
  EXPECT_THROW(load_config(temp_dir("no_config") / "x.cfg"), IoError);
}

TEST(Config, EveryKeyIsAccepted) {
  for (const auto& key : config_keys()) {
    std::string value = "1";
    if (key == "mode") value = "adapter";
    if (key == "placement") value = "distributed:4";
    if (key == "patch") value = "1,2,2";
    if (key == "init") value = "ckpt";
    if (key == "temporal_stride" || key == "spatial_stride") value = "2";
    if (key == "model_dim") value = "128";
    if (key == "heads") value = "4";
    if (key == "layers") value = "8";
    if (key == "beta1" || key == "beta2" || key == "p_zero") value = "0.5";
    EXPECT_NO_THROW(parse_config(key + " = " + value + "\n")) << key;
  }
}

// --------------------------------------------------------------- ablations

TEST(Ablation, ArmsPerAxis) {
  const ModelConfig m;
  const TrainConfig t;
  EXPECT_EQ(ablation_arms(AblationAxis::structure, m, t).size(), 2u);
  EXPECT_EQ(ablation_arms(AblationAxis::placement, m, t).size(), 6u);
  EXPECT_EQ(ablation_arms(AblationAxis::decouple, m, t).size(), 2u);
  EXPECT_EQ(ablation_arms(AblationAxis::shift, m, t).size(), 2u);
  EXPECT_EQ(ablation_arms(AblationAxis::pzero, m, t).size(), 3u);
  for (auto axis : {AblationAxis::structure, AblationAxis::placement, AblationAxis::decouple, AblationAxis::shift,
                    AblationAxis::pzero}) {
    EXPECT_EQ(parse_axis(axis_name(axis)), axis);
    for (const auto& arm : ablation_arms(axis, m, t)) {
      EXPECT_EQ(arm.train.steps, t.steps) << arm.name;
      EXPECT_EQ(arm.train.batch_size, t.batch_size) << arm.name;
    }
  }
  EXPECT_THROW(parse_axis("weighting"), ArgumentError);
  const auto d = ablation_arms(AblationAxis::decouple, m, t);
  EXPECT_TRUE(d[0].model.decouple);
  EXPECT_FALSE(d[1].model.decouple);
}

TEST(Ablation, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), ArgumentError);
}

TEST(Ablation, StructureArmsShareDataStream) {
  const auto cfg = small_model();
  auto tc = TrainConfig{};
  tc.steps = 3;
  tc.batch_size = 2;
  const auto backbone = init_params(small_model(ModelMode::base), 8);
  const auto train = generate({SampleTask::mv2v_inpaint, SampleTask::v2v_gray}, 6, 9, kSmall);
  const auto val = generate({SampleTask::mv2v_inpaint}, 2, 10, kSmall);
  const auto r = run_ablation(AblationAxis::structure, {1}, cfg, tc, backbone, train, val);
  ASSERT_EQ(r.runs.size(), 2u);
  EXPECT_TRUE(r.digests_match);
  EXPECT_EQ(r.runs[0].data_digest, r.runs[1].data_digest);
  EXPECT_EQ(r.runs[0].train_curve.size(), 3u);
  EXPECT_NE(r.tsv().find("fullft\tmedian"), std::string::npos);
  EXPECT_NE(r.summary().find("data digests identical across arms: yes"), std::string::npos);
  EXPECT_THROW(run_ablation(AblationAxis::structure, {}, cfg, tc, backbone, train, val), ArgumentError);
}

TEST(Ablation, PlacementWithKEqualLIsDegenerate) {
  auto cfg = small_model();
  cfg.layers = 2;
  auto tc = TrainConfig{};
  tc.steps = 3;
  tc.batch_size = 2;
  auto base_cfg = cfg;
  base_cfg.mode = ModelMode::base;
  auto backbone = init_params(base_cfg, 11);
  Rng rng(12);
  checks::jitter(backbone, rng, 0.1);
  const auto train = generate({SampleTask::mv2v_inpaint}, 4, 13, kSmall);
  const auto val = generate({SampleTask::mv2v_inpaint}, 2, 14, kSmall);
  const auto r = run_ablation(AblationAxis::placement, {1, 2}, cfg, tc, backbone, train, val);
  EXPECT_TRUE(r.digests_match);
  const auto cont = PlacementSpec::continuous_first(2).str(), dist = PlacementSpec::distributed_even(2).str();
  int pairs = 0;
  for (const auto& a : r.runs) {
    if (a.arm != cont) continue;
    for (const auto& b : r.runs) {
      if (b.arm != dist || b.seed != a.seed) continue;
      EXPECT_EQ(a.train_curve, b.train_curve);
      EXPECT_EQ(a.final_loss(), b.final_loss());
      ++pairs;
    }
  }
  EXPECT_EQ(pairs, 2);
}

TEST(Ablation, BackboneMatchesRecipeGeometry) {
  BackboneRecipe recipe;
  recipe.samples = 4;
  recipe.steps = 2;
  const auto cfg = small_model();
  const auto p = pretrain_backbone(cfg, recipe, kSmall);
  for (const auto& [name, param] : p) EXPECT_EQ(name.rfind("context_", 0), std::string::npos) << name;
  EXPECT_NO_THROW(derive_from_base(p, cfg));
  // The final projection has moved off zero, so the backbone is no longer the identity-zero model.
  double s = 0.0;
  for (float v : p.at("final.proj.weight").value.data()) s += std::abs(v);
  EXPECT_GT(s, 0.0);
}

}  // namespace
}  // namespace vace
