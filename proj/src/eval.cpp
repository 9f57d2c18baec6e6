// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "vace/checkpoint.hpp"
#include "vace/errors.hpp"
#include "vace/train.hpp"

namespace vace {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

double psnr_inactive(const FrameSeq& output, const Vcu& vcu) {
  const auto h = vcu.height(), w = vcu.width();
  if (output.shape() != Shape{vcu.video_len, h, w, 3}) ops::dim_error("psnr_inactive", output.shape(), vcu.frames.shape());
  const auto off = static_cast<std::size_t>(vcu.ref_count * h * w);
  double se = 0.0;
  std::int64_t count = 0;
  for (std::size_t p = 0; p < output.size() / 3; ++p) {
    if (vcu.masks[off + p] != 0.0f) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = static_cast<double>(output[3 * p + c]) - vcu.frames[3 * (off + p) + c];
      se += d * d;
    }
    count += 3;
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  const double mse = se / static_cast<double>(count);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(4.0 / mse));
}

double flicker(const FrameSeq& video) {
  if (video.rank() != 4) throw DimensionError("flicker: video must be (n, h, w, 3)");
  const auto n = video.dim(0);
  if (n < 2) return 0.0;
  const auto frame = video.size() / static_cast<std::size_t>(n);
  double total = 0.0;
  for (std::size_t i = frame; i < video.size(); ++i) total += std::abs(video[i] - video[i - frame]);
  return total / static_cast<double>(video.size() - frame);
}

EvalReport evaluate(const ParamStore& params, const ModelConfig& cfg, const std::vector<TrainSample>& val,
                    const EvalOptions& options) {
  if (val.empty()) throw ArgumentError("eval: empty validation set");
  options.sampler.check();
  EvalReport r;
  std::map<std::string, TaskLoss> tasks;
  std::map<std::string, std::int64_t> sampled_per_task;
  double psnr_sum = 0.0, flicker_sum = 0.0;
  for (const auto& s : val) {
    const std::string name = sample_task_name(s.task);
    auto& t = tasks[name];
    t.task = name;
    t.loss += validation_loss(params, cfg, prepare_sample(s, cfg), s.seed);
    ++t.count;
    if (sampled_per_task[name] >= options.samples_per_task) continue;
    ++sampled_per_task[name];
    SampleConfig sc = options.sampler;
    sc.seed = Rng::derive_seed(options.sampler.seed, s.seed);
    const auto out = euler_sample(params, cfg, s.vcu, sc);
    flicker_sum += flicker(out);
    ++r.sampled;
    if (s.vcu.task_tag.kind == TaskKind::mv2v) {
      const double p = psnr_inactive(out, s.vcu);
      if (!std::isnan(p)) {
        psnr_sum += p;
        ++r.psnr_count;
      }
    }
  }
  for (auto& [name, t] : tasks) {
    t.loss /= static_cast<double>(t.count);
    r.tasks.push_back(t);
  }
  if (r.psnr_count) r.psnr_inactive = psnr_sum / static_cast<double>(r.psnr_count);
  if (r.sampled) r.flicker = flicker_sum / static_cast<double>(r.sampled);

  Digest d;
  const auto text = to_json(cfg).dump() + "|steps=" + std::to_string(options.sampler.steps) +
                    "|guide=" + num(options.sampler.guide) + "|seed=" + std::to_string(options.sampler.seed) +
                    "|composite=" + std::to_string(options.sampler.composite_inactive) +
                    "|shift_grid=" + std::to_string(options.sampler.shift_grid) + "|shift=" + num(options.sampler.shift) +
                    "|per_task=" + std::to_string(options.samples_per_task);
  d.update(text.data(), text.size());
  r.config_digest = d.hex();
  return r;
}

std::string EvalReport::tsv() const {
  std::ostringstream out;
  out << "section\tkey\tcount\tvalue\n";
  for (const auto& t : tasks) out << "loss\t" << t.task << "\t" << t.count << "\t" << num(t.loss) << "\n";
  out << "psnr_inactive\tmv2v\t" << psnr_count << "\t" << num(psnr_inactive) << "\n";
  out << "flicker\tall\t" << sampled << "\t" << num(flicker) << "\n";
  out << "digest\tconfig\t-\t" << config_digest << "\n";
  return out.str();
}

std::string EvalReport::summary() const {
  std::ostringstream out;
  out << "validation loss by task (probe t = 0.25, 0.5, 0.75):\n";
  for (const auto& t : tasks) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-18s n=%-4lld %.6f\n", t.task.c_str(), static_cast<long long>(t.count), t.loss);
    out << buf;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "psnr_inactive: %.3f dB over %lld MV2V outputs\nflicker: %.6f over %lld outputs\n",
                psnr_inactive, static_cast<long long>(psnr_count), flicker, static_cast<long long>(sampled));
  out << buf << "config digest: " << config_digest << "\n";
  return out.str();
}

}  // namespace vace
