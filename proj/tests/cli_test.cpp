// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0
// Runs the vace binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vace/checkpoint.hpp"
#include "vace/datagen.hpp"

namespace vace {
namespace {

namespace fs = std::filesystem;

struct Run {
  int status = -1;
  std::string output;  // stdout and stderr
};

Run vace(const std::string& args) {
  const std::string cmd = std::string("\"") + VACE_CLI_PATH + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("vace_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool same_tree(const fs::path& a, const fs::path& b) {
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) return false;
    ++files;
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) files -= e.is_regular_file();
  return files == 0;
}

TEST(Cli, GenDataIsDeterministic) {
  const auto d = temp_dir("gen");
  ASSERT_EQ(vace("gen-data --count 10 --seed 7 --out " + (d / "a").string()).status, 0);
  ASSERT_EQ(vace("gen-data --count 10 --seed 7 --out " + (d / "b").string()).status, 0);
  EXPECT_TRUE(same_tree(d / "a", d / "b"));
  EXPECT_EQ(read_dataset(d / "a").size(), 10u);
  ASSERT_EQ(vace("gen-data --count 10 --seed 8 --out " + (d / "c").string()).status, 0);
  EXPECT_FALSE(same_tree(d / "a", d / "c"));
  fs::remove_all(d);
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto unknown = vace("gen-data --count 3 --frobnicate --out /tmp/x");
  EXPECT_EQ(unknown.status, 2);
  EXPECT_NE(unknown.output.find("--count"), std::string::npos) << unknown.output;  // help text

  const auto missing = vace("sample --ckpt /nonexistent/ckpt --task t2v --out /tmp/vace_cli_test_never");
  EXPECT_EQ(missing.status, 2);
  EXPECT_NE(missing.output.find("/nonexistent/ckpt"), std::string::npos) << missing.output;

  EXPECT_EQ(vace("").status, 2);
  EXPECT_EQ(vace("ablate --axis weighting --out /tmp/x").status, 2);
  EXPECT_EQ(vace("gen-data --tasks nope --out /tmp/x").status, 2);
}

TEST(Cli, BadConfigExitsTwoWithLine) {
  const auto d = temp_dir("cfg");
  std::ofstream(d / "bad.cfg") << "steps = 3\nlearning_rat = 1\n";
  ASSERT_EQ(vace("gen-data --count 2 --out " + (d / "data").string()).status, 0);
  const auto r = vace("train --data " + (d / "data").string() + " --config " + (d / "bad.cfg").string() + " --out " +
                      (d / "ck").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("config line 2"), std::string::npos) << r.output;
  fs::remove_all(d);
}

TEST(Cli, TrainSampleEvalPipeline) {
  const auto d = temp_dir("pipeline");
  std::ofstream(d / "run.cfg") << "steps = 4\nbatch_size = 2\nframes = 4\nheight = 16\nwidth = 16\n";
  ASSERT_EQ(vace("gen-data --tasks mv2v_inpaint,v2v_gray --count 4 --frames 4 --height 16 --width 16 --out " +
                 (d / "data").string())
                .status,
            0);
  const auto tr = vace("train --data " + (d / "data").string() + " --val " + (d / "data").string() + " --config " +
                       (d / "run.cfg").string() + " --out " + (d / "ck").string());
  ASSERT_EQ(tr.status, 0) << tr.output;
  const auto ck = load_checkpoint(d / "ck");
  EXPECT_EQ(ck.step, 4);
  const auto log = slurp(d / "ck" / "loss_log.tsv");
  EXPECT_EQ(log.rfind("step\ttask\tloss\n", 0), 0u) << log;
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 1 + 8);  // header + steps * batch

  const auto sa = vace("sample --ckpt " + (d / "ck").string() + " --task mv2v_inpaint --seed 3 --steps 2 --frames 4 --height 16 --width 16 --out " +
                       (d / "sample").string());
  ASSERT_EQ(sa.status, 0) << sa.output;
  const auto out = read_dataset(d / "sample");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].target.shape(), (Shape{4, 16, 16, 3}));

  const auto ev = vace("eval --ckpt " + (d / "ck").string() + " --data " + (d / "data").string() +
                       " --steps 2 --samples-per-task 1 --out " + (d / "eval").string());
  ASSERT_EQ(ev.status, 0) << ev.output;
  const auto tsv = slurp(d / "eval" / "eval.tsv");
  EXPECT_NE(tsv.find("loss\tmv2v_inpaint\t2\t"), std::string::npos) << tsv;
  EXPECT_NE(tsv.find("loss\tv2v_gray\t2\t"), std::string::npos) << tsv;
  EXPECT_TRUE(fs::exists(d / "eval" / "summary.txt"));
  fs::remove_all(d);
}

TEST(Cli, CheckPasses) {
  const auto r = vace("check --seed 1");
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos) << r.output;
}

}  // namespace
}  // namespace vace
