// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

#include "vace/errors.hpp"

namespace vace {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T number(const std::string& v) {
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) throw ConfigError("not a number: '" + v + "'");
  return out;
}

bool boolean(const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

template <typename T, typename Field>
Setter num(Field field) {
  return [field](RunConfig& c, const std::string& v) { field(c) = number<T>(v); };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      // model
      {"mode", [](RunConfig& c, const std::string& v) { c.model.mode = parse_mode(v); }},
      {"layers", num<std::int64_t>([](RunConfig& c) -> auto& { return c.model.layers; })},
      {"model_dim", num<std::int64_t>([](RunConfig& c) -> auto& { return c.model.model_dim; })},
      {"heads", num<std::int64_t>([](RunConfig& c) -> auto& { return c.model.heads; })},
      {"patch",
       [](RunConfig& c, const std::string& v) {
         std::vector<std::int64_t> p;
         std::stringstream ss(v);
         for (std::string part; std::getline(ss, part, ',');) p.push_back(number<std::int64_t>(trim(part)));
         if (p.size() != 3) throw ConfigError("patch needs three extents (t,h,w), got '" + v + "'");
         c.model.patch_t = p[0];
         c.model.patch_h = p[1];
         c.model.patch_w = p[2];
       }},
      {"mlp_ratio", num<std::int64_t>([](RunConfig& c) -> auto& { return c.model.mlp_ratio; })},
      {"text_buckets", num<std::int64_t>([](RunConfig& c) -> auto& { return c.model.text_buckets; })},
      {"max_text_tokens", num<std::int64_t>([](RunConfig& c) -> auto& { return c.model.max_text_tokens; })},
      {"placement", [](RunConfig& c, const std::string& v) { c.model.placement = PlacementSpec::parse(v); }},
      {"decouple", [](RunConfig& c, const std::string& v) { c.model.decouple = boolean(v); }},
      {"temporal_stride", num<std::int64_t>([](RunConfig& c) -> auto& { return c.model.codec.temporal_stride; })},
      {"spatial_stride", num<std::int64_t>([](RunConfig& c) -> auto& { return c.model.codec.spatial_stride; })},
      // training
      {"learning_rate", num<double>([](RunConfig& c) -> auto& { return c.train.learning_rate; })},
      {"weight_decay", num<double>([](RunConfig& c) -> auto& { return c.train.weight_decay; })},
      {"beta1", num<double>([](RunConfig& c) -> auto& { return c.train.beta1; })},
      {"beta2", num<double>([](RunConfig& c) -> auto& { return c.train.beta2; })},
      {"adam_eps", num<double>([](RunConfig& c) -> auto& { return c.train.adam_eps; })},
      {"steps", num<std::int64_t>([](RunConfig& c) -> auto& { return c.train.steps; })},
      {"batch_size", num<std::int64_t>([](RunConfig& c) -> auto& { return c.train.batch_size; })},
      {"p_zero", num<double>([](RunConfig& c) -> auto& { return c.train.p_zero; })},
      {"shift", num<double>([](RunConfig& c) -> auto& { return c.train.shift; })},
      {"seed", num<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.seed; })},
      {"eval_every", num<std::int64_t>([](RunConfig& c) -> auto& { return c.train.eval_every; })},
      {"clip_norm", num<double>([](RunConfig& c) -> auto& { return c.train.clip_norm; })},
      {"skip_invalid", [](RunConfig& c, const std::string& v) { c.train.skip_invalid = boolean(v); }},
      {"init", [](RunConfig& c, const std::string& v) { c.init = v; }},
      {"init_seed", num<std::uint64_t>([](RunConfig& c) -> auto& { return c.init_seed; })},
      // data geometry
      {"frames", num<std::int64_t>([](RunConfig& c) -> auto& { return c.geometry.n; })},
      {"height", num<std::int64_t>([](RunConfig& c) -> auto& { return c.geometry.h; })},
      {"width", num<std::int64_t>([](RunConfig& c) -> auto& { return c.geometry.w; })},
      {"min_shapes", num<std::int64_t>([](RunConfig& c) -> auto& { return c.geometry.min_shapes; })},
      {"max_shapes", num<std::int64_t>([](RunConfig& c) -> auto& { return c.geometry.max_shapes; })},
      // sampling and evaluation
      {"sample_steps", num<std::int64_t>([](RunConfig& c) -> auto& { return c.sampler.steps; })},
      {"guide", num<double>([](RunConfig& c) -> auto& { return c.sampler.guide; })},
      {"sample_seed", num<std::uint64_t>([](RunConfig& c) -> auto& { return c.sampler.seed; })},
      {"composite_inactive", [](RunConfig& c, const std::string& v) { c.sampler.composite_inactive = boolean(v); }},
      {"shift_grid", [](RunConfig& c, const std::string& v) { c.sampler.shift_grid = boolean(v); }},
      {"sample_shift", num<double>([](RunConfig& c) -> auto& { return c.sampler.shift; })},
      {"eval_samples_per_task", num<std::int64_t>([](RunConfig& c) -> auto& { return c.eval_samples_per_task; })},
      // backbone pretraining for ablations
      {"backbone_samples", num<std::int64_t>([](RunConfig& c) -> auto& { return c.backbone.samples; })},
      {"backbone_steps", num<std::int64_t>([](RunConfig& c) -> auto& { return c.backbone.steps; })},
      {"backbone_learning_rate", num<double>([](RunConfig& c) -> auto& { return c.backbone.learning_rate; })},
      {"backbone_seed", num<std::uint64_t>([](RunConfig& c) -> auto& { return c.backbone.seed; })},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, set] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string raw;
  for (int line = 1; std::getline(in, raw); ++line) {
    const auto hash = raw.find('#');
    const auto body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto where = "config line " + std::to_string(line) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + body + "'");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    const auto& table = setters();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second(base, value);
    } catch (const std::exception& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  try {
    base.model.check();
    base.train.check();
    base.sampler.check();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace vace
