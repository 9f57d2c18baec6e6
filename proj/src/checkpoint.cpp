// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "vace/errors.hpp"

namespace vace {
namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint buffers assume a little-endian host");

std::filesystem::path tensor_file(const std::string& name) { return std::filesystem::path("tensors") / (name + ".f32"); }

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("checkpoint manifest: missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint manifest: bad '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"model_dim", c.model_dim},
          {"heads", c.heads},
          {"patch", {c.patch_t, c.patch_h, c.patch_w}},
          {"mlp_ratio", c.mlp_ratio},
          {"text_buckets", c.text_buckets},
          {"max_text_tokens", c.max_text_tokens},
          {"mode", mode_name(c.mode)},
          {"placement", c.placement.str()},
          {"codec", {{"temporal_stride", c.codec.temporal_stride}, {"spatial_stride", c.codec.spatial_stride}}},
          {"decouple", c.decouple}};
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"adam_eps", c.adam_eps},         {"steps", c.steps},
          {"batch_size", c.batch_size},       {"p_zero", c.p_zero},             {"shift", c.shift},
          {"seed", c.seed},                   {"eval_every", c.eval_every},     {"clip_norm", c.clip_norm},
          {"skip_invalid", c.skip_invalid}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.layers = field<std::int64_t>(j, "layers");
  c.model_dim = field<std::int64_t>(j, "model_dim");
  c.heads = field<std::int64_t>(j, "heads");
  const auto patch = field<std::vector<std::int64_t>>(j, "patch");
  if (patch.size() != 3) throw ConfigError("checkpoint manifest: 'patch' needs three entries");
  c.patch_t = patch[0];
  c.patch_h = patch[1];
  c.patch_w = patch[2];
  c.mlp_ratio = field<std::int64_t>(j, "mlp_ratio");
  c.text_buckets = field<std::int64_t>(j, "text_buckets");
  c.max_text_tokens = field<std::int64_t>(j, "max_text_tokens");
  c.mode = parse_mode(field<std::string>(j, "mode"));
  c.placement = PlacementSpec::parse(field<std::string>(j, "placement"));
  const auto codec = field<json>(j, "codec");
  c.codec.temporal_stride = field<std::int64_t>(codec, "temporal_stride");
  c.codec.spatial_stride = field<std::int64_t>(codec, "spatial_stride");
  c.decouple = field<bool>(j, "decouple");
  c.check();
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = field<double>(j, "learning_rate");
  c.weight_decay = field<double>(j, "weight_decay");
  c.beta1 = field<double>(j, "beta1");
  c.beta2 = field<double>(j, "beta2");
  c.adam_eps = field<double>(j, "adam_eps");
  c.steps = field<std::int64_t>(j, "steps");
  c.batch_size = field<std::int64_t>(j, "batch_size");
  c.p_zero = field<double>(j, "p_zero");
  c.shift = field<double>(j, "shift");
  c.seed = field<std::uint64_t>(j, "seed");
  c.eval_every = field<std::int64_t>(j, "eval_every");
  c.clip_norm = field<double>(j, "clip_norm");
  c.skip_invalid = field<bool>(j, "skip_invalid");
  c.check();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "tensors", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json params = json::array();
  for (const auto& [name, p] : ckpt.params) {
    const auto rel = tensor_file(name);
    std::ofstream out(dir / rel, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(p.value.ptr()), static_cast<std::streamsize>(p.value.size() * 4));
    if (!out) throw IoError("cannot write " + (dir / rel).string());
    params.push_back({{"name", name}, {"shape", p.value.shape()}, {"trainable", p.trainable}, {"file", rel.string()}});
  }
  const json manifest = {{"format", "vace-checkpoint"},
                         {"version", kCheckpointVersion},
                         {"model", to_json(ckpt.model)},
                         {"train", to_json(ckpt.train)},
                         {"step", ckpt.step},
                         {"rng", {{"algorithm", Rng::kAlgorithm}, {"seed", ckpt.rng.seed()}, {"counter", ckpt.rng.counter()}}},
                         {"params", params}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("checkpoint not found: " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint manifest: " + std::string(e.what()), e.byte);
  }
  if (m.value("format", "") != "vace-checkpoint") throw ParseError("checkpoint manifest: not a vace checkpoint", 0);
  const int version = m.value("version", -1);
  if (version != kCheckpointVersion) {
    throw IncompatibleVersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.model = model_config_from_json(field<json>(m, "model"));
  c.train = train_config_from_json(field<json>(m, "train"));
  c.step = field<std::int64_t>(m, "step");
  const auto rng = field<json>(m, "rng");
  if (field<std::string>(rng, "algorithm") != Rng::kAlgorithm) {
    throw IncompatibleVersionError("checkpoint rng algorithm " + field<std::string>(rng, "algorithm"));
  }
  c.rng = Rng(field<std::uint64_t>(rng, "seed"), field<std::uint64_t>(rng, "counter"));

  std::set<std::string> listed;
  for (const auto& p : field<json>(m, "params")) {
    const auto name = field<std::string>(p, "name");
    const auto shape = field<Shape>(p, "shape");
    const auto path = dir / tensor_file(name);
    std::ifstream buf(path, std::ios::binary);
    if (!buf) throw IoError("checkpoint: missing buffer for parameter '" + name + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(buf)), {});
    if (std::any_of(shape.begin(), shape.end(), [](auto e) { return e < 0; })) {
      throw ParseError("checkpoint: parameter '" + name + "' has a negative extent", 0);
    }
    const auto expect = static_cast<std::size_t>(shape_numel(shape)) * 4;
    if (bytes.size() != expect) {
      throw ParseError("checkpoint: buffer of parameter '" + name + "' has " + std::to_string(bytes.size()) +
                           " bytes, expected " + std::to_string(expect),
                       std::min(bytes.size(), expect));
    }
    std::vector<float> values(expect / 4);
    std::memcpy(values.data(), bytes.data(), expect);
    c.params.add(name, Tensor(shape, std::move(values)), field<bool>(p, "trainable"));
    listed.insert(name);
  }

  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir / "tensors", ec)) {
    const auto file = e.path().filename().string();
    if (file.size() > 4 && file.ends_with(".f32") && !listed.count(file.substr(0, file.size() - 4))) {
      throw ParseError("checkpoint: buffer '" + file + "' has no manifest entry", 0);
    }
  }
  const auto expected = param_names(c.model);
  if (std::set<std::string>(expected.begin(), expected.end()) != listed) {
    for (const auto& name : expected) {
      if (!listed.count(name)) throw ParseError("checkpoint: manifest lacks parameter '" + name + "'", 0);
    }
    throw ParseError("checkpoint: manifest lists parameters the model does not define", 0);
  }
  return c;
}

}  // namespace vace
