// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/train.hpp"

#include <cmath>
#include <cstdio>

#include "vace/codec.hpp"
#include "vace/errors.hpp"

namespace vace {
namespace {

// u in (0, 1): the generator can return exactly 0.
double open_uniform(Rng& rng) {
  for (;;) {
    const double u = rng.uniform();
    if (u > 0.0) return u;
  }
}

void adamw(TrainState& state, const TrainConfig& tc, double grad_scale) {
  const auto t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(tc.beta1, t);
  const double c2 = 1.0 - std::pow(tc.beta2, t);
  const auto lr = static_cast<float>(tc.learning_rate);
  const auto decay = static_cast<float>(1.0 - tc.learning_rate * tc.weight_decay);
  const auto b1 = static_cast<float>(tc.beta1), b2 = static_cast<float>(tc.beta2);
  const auto eps = static_cast<float>(tc.adam_eps);
  const auto inv_c1 = static_cast<float>(1.0 / c1), inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  const auto scale = static_cast<float>(grad_scale);
  for (auto& [name, mom] : state.moments) {
    auto& p = state.params.at(name);
    auto& g = p.value.grad();
    auto* x = p.value.ptr();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const float gi = g[i] * scale;
      mom.m[i] = b1 * mom.m[i] + (1.0f - b1) * gi;
      mom.v[i] = b2 * mom.v[i] + (1.0f - b2) * gi * gi;
      x[i] = x[i] * decay - lr * (mom.m[i] * inv_c1) / (std::sqrt(mom.v[i]) * inv_sqrt_c2 + eps);
    }
  }
}

std::string describe_failure(const TrainSample& s, const std::string& why) {
  return std::string(sample_task_name(s.task)) + " seed " + std::to_string(s.seed) + ": " + why;
}

}  // namespace

void TrainConfig::check() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(p_zero >= 0.0 && p_zero <= 1.0)) throw ConfigError("p_zero must be in [0, 1]");
  if (!(shift >= 1.0)) throw ConfigError("shift must be at least 1");
  if (eval_every < 0) throw ConfigError("eval_every must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
}

double shift_time(double u, double s) {
  if (!(u > 0.0 && u < 1.0)) throw ArgumentError("shift_time: u must be in (0, 1)");
  if (!(s >= 1.0)) throw ArgumentError("shift_time: s must be at least 1");
  return s * u / (1.0 + (s - 1.0) * u);
}

FlowPair flow_pair(const Tensor& x0, const Tensor& noise, float t) {
  if (x0.shape() != noise.shape()) ops::dim_error("flow_pair", x0.shape(), noise.shape());
  FlowPair out{Tensor(x0.shape()), Tensor(x0.shape())};
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out.x_t[i] = (1.0f - t) * x0[i] + t * noise[i];
    out.v_target[i] = noise[i] - x0[i];
  }
  return out;
}

std::string format_loss_record(const LossRecord& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", r.loss);
  return std::to_string(r.step) + "\t" + r.task.name() + "\t" + buf;
}

TrainState TrainState::start(ParamStore params, std::uint64_t seed) {
  TrainState s;
  s.params = std::move(params);
  for (auto& [name, p] : s.params) {
    if (!p.trainable) continue;
    s.moments[name] = {std::vector<float>(p.value.size(), 0.0f), std::vector<float>(p.value.size(), 0.0f)};
  }
  s.rng = Rng(seed);
  return s;
}

PreparedSample prepare_sample(const TrainSample& sample, const ModelConfig& cfg) {
  const auto problems = validate(sample.vcu);
  if (!problems.empty()) {
    throw ValueError("invalid sample: " + problems.front().path + ": " + problems.front().message);
  }
  PreparedSample p;
  p.bundle = encode_vcu(sample.vcu, cfg.codec, cfg.decouple);
  p.x0 = encode_target(sample.vcu, sample.target, cfg.codec);
  TokenGrid::of(p.x0, p.bundle.ref_latent_len, cfg);  // patch divisibility
  p.text_ids = text_tokens(sample.vcu.prompt, cfg);
  p.empty_text_ids = text_tokens("", cfg);
  p.task = sample.vcu.task_tag;
  return p;
}

double train_step(TrainState& state, const ModelConfig& cfg, const TrainConfig& tc,
                  const std::vector<const PreparedSample*>& batch) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  state.params.zero_grad();
  double total = 0.0;
  for (const auto* s : batch) {
    Rng noise_rng(state.rng.next_u64());
    const double u = open_uniform(state.rng);
    const bool drop = state.rng.bernoulli(tc.p_zero);
    const auto t = static_cast<float>(shift_time(u, tc.shift));
    const auto noise = normal<float>(noise_rng, s->x0.shape());
    const auto pair = flow_pair(s->x0, noise, t);
    const auto in = make_input(cfg, pair.x_t, s->bundle, drop ? s->empty_text_ids : s->text_ids, t);
    const double loss = loss_and_grad(state.params, cfg, in, patch_rows<float>(pair.v_target, cfg));
    state.log.push_back({state.step, s->task, loss});
    total += loss;
  }
  const double n = static_cast<double>(batch.size());
  double scale = 1.0 / n;
  if (tc.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [name, mom] : state.moments) {
      for (float g : state.params.at(name).value.grad()) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq) * scale;
    if (norm > tc.clip_norm) scale *= tc.clip_norm / norm;
  }
  adamw(state, tc, scale);
  ++state.step;
  return total / n;
}

double train_step(TrainState& state, const ModelConfig& cfg, const TrainConfig& tc,
                  const std::vector<TrainSample>& batch) {
  std::vector<PreparedSample> prepared;
  for (const auto& s : batch) {
    try {
      prepared.push_back(prepare_sample(s, cfg));
    } catch (const std::exception& e) {
      if (!tc.skip_invalid) throw;
      state.skipped.push_back(describe_failure(s, e.what()));
    }
  }
  if (prepared.empty()) throw ValueError("train_step: no valid sample in batch");
  std::vector<const PreparedSample*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  return train_step(state, cfg, tc, ptrs);
}

double validation_loss(const ParamStore& params, const ModelConfig& cfg, const PreparedSample& sample,
                       std::uint64_t sample_seed) {
  const Rng root(Rng::derive_seed(sample_seed, kProbeStream));
  double total = 0.0;
  for (std::size_t j = 0; j < kProbeTimes.size(); ++j) {
    Rng rng = root.split(j);
    const auto noise = normal<float>(rng, sample.x0.shape());
    const auto pair = flow_pair(sample.x0, noise, kProbeTimes[j]);
    const auto in = make_input(cfg, pair.x_t, sample.bundle, sample.text_ids, kProbeTimes[j]);
    total += loss_only(params, cfg, in, patch_rows<float>(pair.v_target, cfg));
  }
  return total / static_cast<double>(kProbeTimes.size());
}

EvalPoint evaluate_loss(const ParamStore& params, const ModelConfig& cfg, const std::vector<TrainSample>& val,
                        std::int64_t step) {
  if (val.empty()) throw ArgumentError("evaluate_loss: empty validation set");
  EvalPoint e;
  e.step = step;
  std::map<std::string, std::int64_t> counts;
  double total = 0.0;
  for (const auto& s : val) {
    const double loss = validation_loss(params, cfg, prepare_sample(s, cfg), s.seed);
    const std::string key = sample_task_name(s.task);
    e.per_task[key] += loss;
    ++counts[key];
    total += loss;
  }
  for (auto& [k, v] : e.per_task) v /= static_cast<double>(counts[k]);
  e.mean_loss = total / static_cast<double>(val.size());
  return e;
}

FitResult fit(const ModelConfig& cfg, const TrainConfig& tc, ParamStore init, const std::vector<TrainSample>& train,
              const std::vector<TrainSample>& val) {
  cfg.check();
  tc.check();
  FitResult r;
  r.state = TrainState::start(std::move(init), tc.seed);
  Digest digest;
  std::vector<PreparedSample> prepared;
  std::vector<std::uint64_t> seeds;
  for (const auto& s : train) {
    const auto bytes = encode_record(s);
    digest.update(bytes.data(), bytes.size());
    try {
      prepared.push_back(prepare_sample(s, cfg));
      seeds.push_back(s.seed);
    } catch (const std::exception& e) {
      if (!tc.skip_invalid) throw;
      r.state.skipped.push_back(describe_failure(s, e.what()));
    }
  }
  if (prepared.empty() && tc.steps > 0) throw ArgumentError("fit: no usable training samples");

  // Replays the three words per sample that train_step draws (noise seed,
  // time, text drop) on a copy of the stream.
  auto record_stream = [&](Rng rng, const std::vector<std::size_t>& picks) {
    for (auto i : picks) {
      digest.update_u64(seeds[i]);
      digest.update_u64(rng.next_u64());
      digest.update_u64(rng.next_u64());
      digest.update_u64(rng.next_u64());
    }
  };

  if (!val.empty()) r.evals.push_back(evaluate_loss(r.state.params, cfg, val, 0));
  const auto n = static_cast<std::int64_t>(prepared.size());
  for (std::int64_t step = 0; step < tc.steps; ++step) {
    std::vector<std::size_t> picks;
    std::vector<const PreparedSample*> batch;
    for (std::int64_t b = 0; b < tc.batch_size; ++b) {
      picks.push_back(static_cast<std::size_t>(r.state.rng.uniform_int(0, n - 1)));
      batch.push_back(&prepared[picks.back()]);
    }
    record_stream(r.state.rng, picks);
    train_step(r.state, cfg, tc, batch);
    const bool last = step + 1 == tc.steps;
    if (!val.empty() && (last || (tc.eval_every > 0 && (step + 1) % tc.eval_every == 0))) {
      r.evals.push_back(evaluate_loss(r.state.params, cfg, val, step + 1));
    }
  }
  r.data_digest = digest.hex();
  return r;
}

void Digest::update(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h_ ^= p[i];
    h_ *= 0x100000001b3ULL;
  }
}

void Digest::update_u64(std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  update(b, 8);
}

std::string Digest::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
  return buf;
}

}  // namespace vace
