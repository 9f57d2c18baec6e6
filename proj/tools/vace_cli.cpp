// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// vace: data generation, training, sampling, evaluation, ablations and the
// invariant suite. Exit codes: 0 success, 1 validation failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vace/ablate.hpp"
#include "vace/checkpoint.hpp"
#include "vace/checks.hpp"
#include "vace/config.hpp"
#include "vace/datagen.hpp"
#include "vace/errors.hpp"
#include "vace/eval.hpp"
#include "vace/sampler.hpp"
#include "vace/train.hpp"

namespace fs = std::filesystem;
using namespace vace;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kUsage = 2;

// Missing inputs and bad flags or config are the caller's mistake.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, sep);) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::vector<SampleTask> parse_tasks(const std::string& text) {
  if (text == "all") return all_sample_tasks();
  std::vector<SampleTask> out;
  for (const auto& name : split(text, ',')) out.push_back(parse_sample_task(name));
  if (out.empty()) throw ArgumentError("--tasks: empty task list");
  return out;
}

std::vector<SampleTask> mixed_edit_tasks() {
  return {SampleTask::v2v_gray,  SampleTask::v2v_layout,   SampleTask::v2v_scribble,  SampleTask::v2v_depth,
          SampleTask::v2v_flow, SampleTask::mv2v_inpaint, SampleTask::mv2v_outpaint};
}

void require_dir(const std::string& what, const fs::path& p) {
  if (!fs::exists(p)) throw UsageError(what + " not found: " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) return {};
  require_dir("config file", path);
  return load_config(path);
}

Checkpoint load_ckpt(const std::string& path) {
  require_dir("checkpoint", path);
  try {
    return load_checkpoint(path);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
}

std::string loss_log(const TrainState& s) {
  std::string out = "step\ttask\tloss\n";
  for (const auto& r : s.log) out += format_loss_record(r) + "\n";
  return out;
}

std::string eval_table(const std::vector<EvalPoint>& evals) {
  std::ostringstream out;
  out << "step\ttask\tloss\n";
  char buf[64];
  for (const auto& e : evals) {
    for (const auto& [task, loss] : e.per_task) {
      std::snprintf(buf, sizeof buf, "%.9g", loss);
      out << e.step << "\t" << task << "\t" << buf << "\n";
    }
    std::snprintf(buf, sizeof buf, "%.9g", e.mean_loss);
    out << e.step << "\tmean\t" << buf << "\n";
  }
  return out.str();
}

struct GenData {
  std::string tasks = "all";
  std::int64_t count = 100;
  std::uint64_t seed = 0;
  std::string out;
  Geometry geo;
};

int gen_data(const GenData& o) {
  const auto samples = generate(parse_tasks(o.tasks), o.count, o.seed, o.geo);
  write_dataset(samples, o.out);
  std::printf("wrote %lld samples to %s\n", static_cast<long long>(samples.size()), o.out.c_str());
  return kOk;
}

struct Train {
  std::string data, val, config, out;
};

int train(const Train& o) {
  const auto cfg = config_or_default(o.config);
  require_dir("dataset", o.data);
  const auto data = read_dataset(o.data);
  std::vector<TrainSample> val;
  if (!o.val.empty()) {
    require_dir("validation dataset", o.val);
    val = read_dataset(o.val);
  }
  ParamStore init;
  if (!cfg.init.empty()) {
    const auto base = load_ckpt(cfg.init);
    init = derive_from_base(base.params, cfg.model);
  } else {
    init = init_params(cfg.model, cfg.init_seed);
  }
  auto res = fit(cfg.model, cfg.train, std::move(init), data, val);
  save_checkpoint({cfg.model, cfg.train, res.state.params, res.state.step, res.state.rng}, o.out);
  write_text(fs::path(o.out) / "loss_log.tsv", loss_log(res.state));
  if (!val.empty()) write_text(fs::path(o.out) / "evals.tsv", eval_table(res.evals));
  for (const auto& line : res.state.skipped) std::fprintf(stderr, "skipped: %s\n", line.c_str());
  std::printf("trained %lld steps (%s, %zu samples, data digest %s)\n", static_cast<long long>(res.state.step),
              mode_name(cfg.model.mode), data.size(), res.data_digest.c_str());
  for (const auto& e : res.evals) std::printf("  step %lld validation loss %.6f\n", static_cast<long long>(e.step), e.mean_loss);
  return kOk;
}

struct Sample {
  std::string ckpt, task, vcu_file, out;
  std::uint64_t seed = 0;
  std::int64_t steps = 40;
  double guide = 3.0;
  bool composite = false;
  Geometry geo;
};

int sample(const Sample& o) {
  const auto ck = load_ckpt(o.ckpt);
  TrainSample s;
  if (!o.vcu_file.empty()) {
    require_dir("vcu file", o.vcu_file);
    std::ifstream in(o.vcu_file, std::ios::binary);
    s = decode_record(std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {}));
  } else {
    s = make_sample(parse_sample_task(o.task), o.seed, o.geo);
  }
  SampleConfig sc;
  sc.steps = o.steps;
  sc.guide = o.guide;
  sc.seed = o.seed;
  sc.composite_inactive = o.composite;
  s.target = euler_sample(ck.params, ck.model, s.vcu, sc);
  write_dataset({s}, o.out);
  std::printf("wrote %lld-frame video to %s\n", static_cast<long long>(s.target.dim(0)), o.out.c_str());
  return kOk;
}

struct Eval {
  std::string ckpt, data, out;
  std::uint64_t seed = 0;
  std::int64_t steps = 40;
  double guide = 3.0;
  std::int64_t per_task = 4;
};

int eval(const Eval& o) {
  const auto ck = load_ckpt(o.ckpt);
  require_dir("dataset", o.data);
  EvalOptions opt;
  opt.sampler.steps = o.steps;
  opt.sampler.guide = o.guide;
  opt.sampler.seed = o.seed;
  opt.samples_per_task = o.per_task;
  const auto report = evaluate(ck.params, ck.model, read_dataset(o.data), opt);
  write_text(fs::path(o.out) / "eval.tsv", report.tsv());
  write_text(fs::path(o.out) / "summary.txt", report.summary());
  std::cout << report.summary();
  return kOk;
}

struct Ablate {
  std::string axis, seeds = "1", out, config, backbone;
  std::int64_t steps = -1;
  std::int64_t train_count = 400;
  std::int64_t val_per_task = 50;
  std::uint64_t data_seed = 1;
};

int ablate(const Ablate& o) {
  const auto axis = parse_axis(o.axis);
  auto cfg = config_or_default(o.config);
  if (o.steps >= 0) cfg.train.steps = o.steps;
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split(o.seeds, ',')) seeds.push_back(std::stoull(s));

  const auto tasks = axis == AblationAxis::decouple ? mixed_edit_tasks() : all_sample_tasks();
  const auto train_set = generate(tasks, o.train_count, Rng::derive_seed(o.data_seed, 1), cfg.geometry);
  const auto val_set = generate(tasks, o.val_per_task * static_cast<std::int64_t>(tasks.size()),
                                Rng::derive_seed(o.data_seed, 2), cfg.geometry);
  ParamStore backbone;
  if (!o.backbone.empty()) {
    backbone = load_ckpt(o.backbone).params;
  } else {
    std::fprintf(stderr, "pretraining backbone (%lld steps)\n", static_cast<long long>(cfg.backbone.steps));
    backbone = pretrain_backbone(cfg.model, cfg.backbone, cfg.geometry);
  }
  const auto report = run_ablation(axis, seeds, cfg.model, cfg.train, backbone, train_set, val_set);
  write_text(fs::path(o.out) / "ablate.tsv", report.tsv());
  write_text(fs::path(o.out) / "summary.txt", report.summary());
  std::cout << report.summary();
  return report.digests_match ? kOk : kInvalid;
}

int check(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : checks::run_all(seed)) {
    std::printf("%s  %-28s %7.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? kOk : kInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vace: toy unified video creation and editing"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenData g;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--tasks", g.tasks, "comma-separated task names, or 'all'")->capture_default_str();
  gen->add_option("--count", g.count, "number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--seed", g.seed, "dataset seed")->capture_default_str();
  gen->add_option("--out", g.out, "output directory")->required();
  gen->add_option("--frames", g.geo.n, "frames per video")->capture_default_str();
  gen->add_option("--height", g.geo.h, "frame height")->capture_default_str();
  gen->add_option("--width", g.geo.w, "frame width")->capture_default_str();

  Train t;
  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  tr->add_option("--data", t.data, "dataset directory")->required();
  tr->add_option("--val", t.val, "validation dataset directory");
  tr->add_option("--config", t.config, "key = value config file");
  tr->add_option("--out", t.out, "checkpoint directory")->required();

  Sample s;
  auto* sa = app.add_subcommand("sample", "generate a video from a checkpoint");
  sa->add_option("--ckpt", s.ckpt, "checkpoint directory")->required();
  auto* task_opt = sa->add_option("--task", s.task, "build the condition unit of this task from --seed");
  auto* file_opt = sa->add_option("--vcu-file", s.vcu_file, "record file holding the condition unit");
  task_opt->excludes(file_opt);
  sa->add_option("--seed", s.seed, "noise (and task) seed")->capture_default_str();
  sa->add_option("--steps", s.steps, "Euler steps")->capture_default_str();
  sa->add_option("--guide", s.guide, "guidance scale")->capture_default_str();
  sa->add_option("--frames", s.geo.n, "frames per video (with --task)")->capture_default_str();
  sa->add_option("--height", s.geo.h, "frame height (with --task)")->capture_default_str();
  sa->add_option("--width", s.geo.w, "frame width (with --task)")->capture_default_str();
  sa->add_flag("--composite-inactive", s.composite, "paste source pixels back where the mask is 0");
  sa->add_option("--out", s.out, "output container directory")->required();

  Eval e;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a validation set");
  ev->add_option("--ckpt", e.ckpt, "checkpoint directory")->required();
  ev->add_option("--data", e.data, "validation dataset directory")->required();
  ev->add_option("--out", e.out, "report directory")->required();
  ev->add_option("--seed", e.seed, "sampler seed")->capture_default_str();
  ev->add_option("--steps", e.steps, "Euler steps")->capture_default_str();
  ev->add_option("--guide", e.guide, "guidance scale")->capture_default_str();
  ev->add_option("--samples-per-task", e.per_task, "sampled outputs per task")->capture_default_str();

  Ablate a;
  auto* ab = app.add_subcommand("ablate", "run an ablation grid");
  ab->add_option("--axis", a.axis, "structure|placement|decouple|shift|pzero")
      ->required()
      ->check(CLI::IsMember({"structure", "placement", "decouple", "shift", "pzero"}));
  ab->add_option("--seeds", a.seeds, "comma-separated training seeds")->capture_default_str();
  ab->add_option("--out", a.out, "report directory")->required();
  ab->add_option("--config", a.config, "key = value config file");
  ab->add_option("--steps", a.steps, "training steps per arm (overrides the config)");
  ab->add_option("--train-count", a.train_count, "training samples")->capture_default_str();
  ab->add_option("--val-per-task", a.val_per_task, "validation samples per task")->capture_default_str();
  ab->add_option("--data-seed", a.data_seed, "seed of the training and validation sets")->capture_default_str();
  ab->add_option("--backbone", a.backbone, "base-mode checkpoint to start arms from (default: pretrain one)");

  std::uint64_t check_seed = 1;
  auto* ch = app.add_subcommand("check", "run the invariant and gradient suite");
  ch->add_option("--seed", check_seed, "seed of the random cases")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }
  if (sa->parsed() && s.task.empty() && s.vcu_file.empty()) {
    std::cerr << "sample: one of --task or --vcu-file is required\n" << sa->help();
    return kUsage;
  }

  try {
    if (gen->parsed()) return gen_data(g);
    if (tr->parsed()) return train(t);
    if (sa->parsed()) return sample(s);
    if (ev->parsed()) return eval(e);
    if (ab->parsed()) return ablate(a);
    if (ch->parsed()) return check(check_seed);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const ArgumentError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kInvalid;
  }
  return kUsage;
}
