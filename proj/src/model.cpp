// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vace {

const char* mode_name(ModelMode mode) {
  switch (mode) {
    case ModelMode::base: return "base";
    case ModelMode::fullft: return "fullft";
    case ModelMode::adapter: return "adapter";
  }
  return "?";
}

ModelMode parse_mode(const std::string& text) {
  if (text == "base") return ModelMode::base;
  if (text == "fullft") return ModelMode::fullft;
  if (text == "adapter") return ModelMode::adapter;
  throw ConfigError("unknown model mode '" + text + "' (expected base, fullft or adapter)");
}

// ---------------------------------------------------------------- placement

std::string PlacementSpec::str() const {
  switch (strategy) {
    case Strategy::continuous_first: return "continuous:" + std::to_string(count);
    case Strategy::distributed_even: return "distributed:" + std::to_string(count);
    case Strategy::explicit_list: {
      std::string out = "explicit:";
      for (std::size_t i = 0; i < indices.size(); ++i) out += (i ? "," : "") + std::to_string(indices[i]);
      return out;
    }
  }
  return "?";
}

PlacementSpec PlacementSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("placement '" + text + "': expected <strategy>:<value>");
  const auto kind = text.substr(0, colon);
  const auto rest = text.substr(colon + 1);
  try {
    if (kind == "continuous") return continuous_first(std::stoll(rest));
    if (kind == "distributed") return distributed_even(std::stoll(rest));
    if (kind == "explicit") {
      std::vector<std::int64_t> idx;
      std::stringstream ss(rest);
      std::string item;
      while (std::getline(ss, item, ',')) idx.push_back(std::stoll(item));
      return explicit_list(std::move(idx));
    }
  } catch (const std::logic_error&) {
    throw ConfigError("placement '" + text + "': malformed number");
  }
  throw ConfigError("placement '" + text + "': unknown strategy '" + kind + "'");
}

std::vector<std::int64_t> resolve_placement(const PlacementSpec& spec, std::int64_t layers) {
  std::vector<std::int64_t> out;
  if (spec.strategy == PlacementSpec::Strategy::explicit_list) {
    if (spec.indices.empty()) throw ArgumentError("placement: explicit list is empty");
    for (std::size_t i = 0; i < spec.indices.size(); ++i) {
      const auto v = spec.indices[i];
      if (v < 0 || v >= layers) {
        throw ArgumentError("placement: index " + std::to_string(v) + " outside [0, " + std::to_string(layers) + ")");
      }
      if (i && v <= spec.indices[i - 1]) {
        throw ArgumentError("placement: explicit indices must be unique and increasing");
      }
    }
    return spec.indices;
  }
  const auto k = spec.count;
  if (k < 1 || k > layers) {
    throw ArgumentError("placement: need 1 <= k <= L (k=" + std::to_string(k) + ", L=" + std::to_string(layers) + ")");
  }
  for (std::int64_t i = 0; i < k; ++i) {
    if (spec.strategy == PlacementSpec::Strategy::continuous_first) out.push_back(i);
    else out.push_back((2 * i * layers + k) / (2 * k));  // round(i * L / k), halves up
  }
  return out;
}

// ------------------------------------------------------------------- config

void ModelConfig::check() const {
  codec.check();
  if (layers < 1 || model_dim < 2 || heads < 1 || mlp_ratio < 1) throw ConfigError("model: sizes must be positive");
  if (model_dim % heads != 0) {
    throw ConfigError("model: model_dim " + std::to_string(model_dim) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (patch_t < 1 || patch_h < 1 || patch_w < 1) throw ConfigError("model: patch sizes must be positive");
  if (text_buckets < 1 || max_text_tokens < 1) throw ConfigError("model: text sizes must be positive");
  if (mode == ModelMode::adapter) {
    try {
      resolve_placement(placement, layers);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
}

TokenGrid TokenGrid::of(const LatentGrid& latent, std::int64_t ref_frames, const ModelConfig& cfg) {
  if (latent.rank() != 4) ops::dim_error("token grid", latent.shape());
  TokenGrid g{ref_frames, latent.dim(0) - ref_frames, latent.dim(1), latent.dim(2), cfg.patch_t, cfg.patch_h,
              cfg.patch_w};
  if (g.video_frames < 0 || g.frames() % g.patch_t || g.height % g.patch_h || g.width % g.patch_w) {
    throw DimensionError("token grid: latent " + shape_str(latent.shape()) + " is not divisible by patch (" +
                         std::to_string(cfg.patch_t) + "," + std::to_string(cfg.patch_h) + "," +
                         std::to_string(cfg.patch_w) + ")");
  }
  return g;
}

// ------------------------------------------------------------------- params

template <typename T>
void BasicParamStore<T>::add(const std::string& name, BasicTensor<T> value, bool trainable) {
  if (!params_.emplace(name, Param<T>{std::move(value), trainable}).second) {
    throw ArgumentError("param store: duplicate name '" + name + "'");
  }
}

template <typename T>
Param<T>& BasicParamStore<T>::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ArgumentError("param store: no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
const Param<T>& BasicParamStore<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ArgumentError("param store: no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
std::vector<std::string> BasicParamStore<T>::names() const {
  std::vector<std::string> out;
  for (const auto& kv : params_) out.push_back(kv.first);
  return out;
}

template <typename T>
void BasicParamStore<T>::zero_grad() {
  for (auto& kv : params_) kv.second.value.zero_grad();
}

template <typename T>
std::size_t BasicParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& kv : params_) n += kv.second.value.size();
  return n;
}

template class BasicParamStore<float>;
template class BasicParamStore<double>;
template class BasicParamStore<long double>;

namespace {

struct ParamSpec {
  std::string name;
  Shape shape;
  enum class Init { normal, zeros, ones } init;
  double stddev = 0.0;
};

std::string main_block(std::int64_t i) { return "main_block." + std::to_string(i) + "."; }
std::string context_block(std::int64_t j) { return "context_block." + std::to_string(j) + "."; }

void block_specs(const std::string& prefix, const ModelConfig& cfg, std::vector<ParamSpec>& out) {
  const auto d = cfg.model_dim;
  const auto hidden = cfg.mlp_ratio * d;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  using I = ParamSpec::Init;
  out.push_back({prefix + "ada.weight", {d, 6 * d}, I::zeros});
  out.push_back({prefix + "ada.bias", {6 * d}, I::zeros});
  out.push_back({prefix + "norm1.gamma", {d}, I::ones});
  out.push_back({prefix + "norm1.beta", {d}, I::zeros});
  out.push_back({prefix + "attn.qkv.weight", {d, 3 * d}, I::normal, s});
  out.push_back({prefix + "attn.proj.weight", {d, d}, I::normal, s});
  out.push_back({prefix + "attn.proj.bias", {d}, I::zeros});
  out.push_back({prefix + "norm2.gamma", {d}, I::ones});
  out.push_back({prefix + "norm2.beta", {d}, I::zeros});
  out.push_back({prefix + "cross.q.weight", {d, d}, I::normal, s});
  out.push_back({prefix + "cross.q.bias", {d}, I::zeros});
  out.push_back({prefix + "cross.kv.weight", {d, 2 * d}, I::normal, s});
  out.push_back({prefix + "cross.proj.weight", {d, d}, I::normal, s});
  out.push_back({prefix + "cross.proj.bias", {d}, I::zeros});
  out.push_back({prefix + "norm3.gamma", {d}, I::ones});
  out.push_back({prefix + "norm3.beta", {d}, I::zeros});
  out.push_back({prefix + "mlp.fc1.weight", {d, hidden}, I::normal, s});
  out.push_back({prefix + "mlp.fc1.bias", {hidden}, I::zeros});
  out.push_back({prefix + "mlp.fc2.weight", {hidden, d}, I::normal, 1.0 / std::sqrt(static_cast<double>(hidden))});
  out.push_back({prefix + "mlp.fc2.bias", {d}, I::zeros});
}

/// Backbone parameters (everything except the context pathway).
std::vector<ParamSpec> backbone_specs(const ModelConfig& cfg) {
  using I = ParamSpec::Init;
  const auto d = cfg.model_dim;
  const auto p = cfg.patch_dim();
  std::vector<ParamSpec> out;
  out.push_back({"main_patchify.weight", {p, d}, I::normal, 1.0 / std::sqrt(static_cast<double>(p))});
  out.push_back({"main_patchify.bias", {d}, I::zeros});
  out.push_back({"text_embed.table", {cfg.text_buckets + 1, d}, I::normal, 1.0});
  out.push_back({"time_mlp.fc1.weight", {d, d}, I::normal, 1.0 / std::sqrt(static_cast<double>(d))});
  out.push_back({"time_mlp.fc1.bias", {d}, I::zeros});
  out.push_back({"time_mlp.fc2.weight", {d, d}, I::normal, 1.0 / std::sqrt(static_cast<double>(d))});
  out.push_back({"time_mlp.fc2.bias", {d}, I::zeros});
  for (std::int64_t i = 0; i < cfg.layers; ++i) block_specs(main_block(i), cfg, out);
  out.push_back({"final.ada.weight", {d, 2 * d}, I::zeros});
  out.push_back({"final.ada.bias", {2 * d}, I::zeros});
  out.push_back({"final.norm.gamma", {d}, I::ones});
  out.push_back({"final.norm.beta", {d}, I::zeros});
  out.push_back({"final.proj.weight", {d, p}, I::zeros});
  out.push_back({"final.proj.bias", {p}, I::zeros});
  return out;
}

bool is_context_param(const std::string& name) {
  return name.rfind("context_embedder.", 0) == 0 || name.rfind("context_block.", 0) == 0;
}

/// Adds the context embedder (copied video embedder, zero mask weights) and,
/// in adapter mode, context blocks copied from their paired main blocks.
void add_context_pathway(ParamStore& store, const ModelConfig& cfg) {
  if (cfg.mode == ModelMode::base) return;
  const auto& w = store.at("main_patchify.weight").value;
  const auto& b = store.at("main_patchify.bias").value;
  store.add("context_embedder.weight_c", w, true);
  store.add("context_embedder.weight_k", w, true);
  store.add("context_embedder.weight_m", Tensor({cfg.patch_volume(), cfg.model_dim}), true);
  store.add("context_embedder.bias", b, true);
  if (cfg.mode != ModelMode::adapter) return;
  const auto placement = resolve_placement(cfg.placement, cfg.layers);
  for (std::size_t j = 0; j < placement.size(); ++j) {
    const auto src = main_block(placement[j]);
    const auto dst = context_block(static_cast<std::int64_t>(j));
    std::vector<ParamSpec> specs;
    block_specs(src, cfg, specs);
    for (const auto& s : specs) store.add(dst + s.name.substr(src.size()), store.at(s.name).value, true);
    store.add(dst + "gate.weight", Tensor({cfg.model_dim, cfg.model_dim}), true);
    store.add(dst + "gate.bias", Tensor({cfg.model_dim}), true);
  }
}

void apply_trainable_flags(ParamStore& store, const ModelConfig& cfg) {
  for (auto& [name, p] : store) p.trainable = cfg.mode != ModelMode::adapter || is_context_param(name);
}

}  // namespace

std::vector<std::string> param_names(const ModelConfig& cfg) {
  return init_params(cfg, 0).names();
}

std::set<std::string> trainable_mask(const ModelConfig& cfg) {
  std::set<std::string> out;
  for (const auto& name : param_names(cfg)) {
    if (cfg.mode != ModelMode::adapter || is_context_param(name)) out.insert(name);
  }
  return out;
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.check();
  ParamStore store;
  Rng rng(seed);
  for (const auto& s : backbone_specs(cfg)) {
    Tensor t(s.shape);
    switch (s.init) {
      case ParamSpec::Init::zeros: break;
      case ParamSpec::Init::ones: t.fill(1.0f); break;
      case ParamSpec::Init::normal:
        for (auto& v : t.data()) v = static_cast<float>(s.stddev * rng.normal());
        break;
    }
    store.add(s.name, std::move(t), true);
  }
  add_context_pathway(store, cfg);
  apply_trainable_flags(store, cfg);
  return store;
}

ParamStore derive_from_base(const ParamStore& base, const ModelConfig& cfg) {
  cfg.check();
  ParamStore store;
  for (const auto& s : backbone_specs(cfg)) {
    if (!base.contains(s.name)) throw ConfigError("derive_from_base: backbone lacks '" + s.name + "'");
    const auto& v = base.at(s.name).value;
    if (v.shape() != s.shape) {
      throw ConfigError("derive_from_base: '" + s.name + "' has shape " + shape_str(v.shape()) + ", expected " +
                        shape_str(s.shape));
    }
    store.add(s.name, v, true);
  }
  add_context_pathway(store, cfg);
  apply_trainable_flags(store, cfg);
  return store;
}

// -------------------------------------------------------------- tokenization

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::int64_t> text_tokens(const std::string& prompt, const ModelConfig& cfg) {
  std::vector<std::int64_t> ids;
  std::istringstream words(prompt);
  std::string word;
  while (static_cast<std::int64_t>(ids.size()) < cfg.max_text_tokens && words >> word) {
    ids.push_back(static_cast<std::int64_t>(fnv1a64(word) % static_cast<std::uint64_t>(cfg.text_buckets)));
  }
  ids.resize(static_cast<std::size_t>(cfg.max_text_tokens), cfg.pad_id());
  return ids;
}

template <typename T>
BasicTensor<T> patch_rows(const Tensor& grid, const ModelConfig& cfg) {
  if (grid.rank() != 4) ops::dim_error("patch_rows", grid.shape());
  const auto f = grid.dim(0), h = grid.dim(1), w = grid.dim(2), c = grid.dim(3);
  const auto pt = cfg.patch_t, ph = cfg.patch_h, pw = cfg.patch_w;
  if (f % pt || h % ph || w % pw) {
    throw DimensionError("patch_rows: grid " + shape_str(grid.shape()) + " is not divisible by patch (" +
                         std::to_string(pt) + "," + std::to_string(ph) + "," + std::to_string(pw) + ")");
  }
  const auto rows = (f / pt) * (h / ph) * (w / pw);
  BasicTensor<T> out(Shape{rows, pt * ph * pw * c});
  T* dst = out.ptr();
  for (std::int64_t t = 0; t < f / pt; ++t)
    for (std::int64_t y = 0; y < h / ph; ++y)
      for (std::int64_t x = 0; x < w / pw; ++x)
        for (std::int64_t dt = 0; dt < pt; ++dt)
          for (std::int64_t dy = 0; dy < ph; ++dy)
            for (std::int64_t dx = 0; dx < pw; ++dx) {
              const float* src = grid.ptr() + grid.offset({t * pt + dt, y * ph + dy, x * pw + dx, 0});
              for (std::int64_t k = 0; k < c; ++k) *dst++ = static_cast<T>(src[k]);
            }
  return out;
}

template <typename T>
Tensor unpatch_rows(const BasicTensor<T>& rows, const TokenGrid& g, std::int64_t channels) {
  const auto pt = g.patch_t, ph = g.patch_h, pw = g.patch_w;
  if (rows.rank() != 2 || rows.dim(0) != g.total_tokens() || rows.dim(1) != pt * ph * pw * channels) {
    ops::dim_error("unpatch_rows", rows.shape(), Shape{g.total_tokens(), pt * ph * pw * channels});
  }
  Tensor out({g.frames(), g.height, g.width, channels});
  const T* src = rows.ptr();
  for (std::int64_t t = 0; t < g.frames() / pt; ++t)
    for (std::int64_t y = 0; y < g.height / ph; ++y)
      for (std::int64_t x = 0; x < g.width / pw; ++x)
        for (std::int64_t dt = 0; dt < pt; ++dt)
          for (std::int64_t dy = 0; dy < ph; ++dy)
            for (std::int64_t dx = 0; dx < pw; ++dx) {
              float* dst = out.ptr() + out.offset({t * pt + dt, y * ph + dy, x * pw + dx, 0});
              for (std::int64_t k = 0; k < channels; ++k) dst[k] = static_cast<float>(*src++);
            }
  return out;
}

template <typename T>
BasicTensor<T> positional_encoding(const TokenGrid& g, std::int64_t model_dim) {
  const std::int64_t q = 2 * (model_dim / 6);
  const std::int64_t frame_width = model_dim - 2 * q;
  BasicTensor<T> out(Shape{g.total_tokens(), model_dim});
  auto fill = [](T* dst, std::int64_t width, double pos) {
    for (std::int64_t i = 0; i < width; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(width));
      dst[i] = static_cast<T>(std::sin(pos * freq));
      if (i + 1 < width) dst[i + 1] = static_cast<T>(std::cos(pos * freq));
    }
  };
  std::int64_t row = 0;
  for (std::int64_t t = 0; t < g.frames() / g.patch_t; ++t)
    for (std::int64_t y = 0; y < g.height / g.patch_h; ++y)
      for (std::int64_t x = 0; x < g.width / g.patch_w; ++x, ++row) {
        T* dst = out.ptr() + row * model_dim;
        fill(dst, frame_width, static_cast<double>(t));
        fill(dst + frame_width, q, static_cast<double>(y));
        fill(dst + frame_width + q, q, static_cast<double>(x));
      }
  return out;
}

template <typename T>
BasicTensor<T> context_rows(const LatentBundle& bundle, const ModelConfig& cfg) {
  if (bundle.x_c.shape() != bundle.x_k.shape() || bundle.m_lat.rank() != 4 ||
      bundle.m_lat.dim(0) != bundle.x_c.dim(0) || bundle.m_lat.dim(1) != bundle.x_c.dim(1) ||
      bundle.m_lat.dim(2) != bundle.x_c.dim(2) || bundle.m_lat.dim(3) != 1) {
    ops::dim_error("context_rows", bundle.x_c.shape(), bundle.m_lat.shape());
  }
  const auto c = patch_rows<T>(bundle.x_c, cfg);
  const auto k = patch_rows<T>(bundle.x_k, cfg);
  const auto m = patch_rows<T>(bundle.m_lat, cfg);
  return ops::concat<T>({&c, &k, &m}, 1);
}

template BasicTensor<float> patch_rows<float>(const Tensor&, const ModelConfig&);
template BasicTensor<double> patch_rows<double>(const Tensor&, const ModelConfig&);
template Tensor unpatch_rows<float>(const BasicTensor<float>&, const TokenGrid&, std::int64_t);
template Tensor unpatch_rows<double>(const BasicTensor<double>&, const TokenGrid&, std::int64_t);
template BasicTensor<float> positional_encoding<float>(const TokenGrid&, std::int64_t);
template BasicTensor<double> positional_encoding<double>(const TokenGrid&, std::int64_t);
template BasicTensor<long double> positional_encoding<long double>(const TokenGrid&, std::int64_t);
template BasicTensor<float> context_rows<float>(const LatentBundle&, const ModelConfig&);
template BasicTensor<double> context_rows<double>(const LatentBundle&, const ModelConfig&);

// -------------------------------------------------------------- model pieces

namespace {

template <typename T>
using StridedMap = Eigen::Map<const ops::MatrixR<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using StridedMutMap = Eigen::Map<ops::MatrixR<T>, 0, Eigen::OuterStride<>>;

/// Column window [col, col + cols) of a row-major (rows, ld) buffer.
template <typename T>
StridedMap<T> window(const T* base, std::int64_t rows, std::int64_t col, std::int64_t cols, std::int64_t ld) {
  return StridedMap<T>(base + col, rows, cols, Eigen::OuterStride<>(ld));
}

template <typename T>
StridedMutMap<T> window(T* base, std::int64_t rows, std::int64_t col, std::int64_t cols, std::int64_t ld) {
  return StridedMutMap<T>(base + col, rows, cols, Eigen::OuterStride<>(ld));
}

/// Q/K/V as column windows: q at (q_ptr, ld_q), k and v likewise.
template <typename T>
struct AttnOperands {
  const T* q;
  std::int64_t ld_q;
  const T* k;
  std::int64_t ld_k;
  const T* v;
  std::int64_t ld_v;
  std::int64_t n;  // query rows
  std::int64_t m;  // key rows
};

template <typename T>
struct AttnGrads {
  T* dq;
  std::int64_t ld_q;
  T* dk;
  std::int64_t ld_k;
  T* dv;
  std::int64_t ld_v;
};

/// Multi-head softmax(Q K^T / sqrt(dh)) V; per-head probabilities go to `probs`.
template <typename T>
BasicTensor<T> attention(const AttnOperands<T>& a, std::int64_t dim, std::int64_t heads,
                         std::vector<BasicTensor<T>>& probs) {
  const auto dh = dim / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  BasicTensor<T> out(Shape{a.n, dim});
  probs.resize(static_cast<std::size_t>(heads));
  for (std::int64_t h = 0; h < heads; ++h) {
    const auto Q = window(a.q, a.n, h * dh, dh, a.ld_q);
    const auto K = window(a.k, a.m, h * dh, dh, a.ld_k);
    const auto V = window(a.v, a.m, h * dh, dh, a.ld_v);
    BasicTensor<T> scores(Shape{a.n, a.m});
    ops::as_matrix(scores).noalias() = (Q * K.transpose()) * inv_sqrt;
    probs[h] = ops::softmax(scores);
    window(out.ptr(), a.n, h * dh, dh, dim).noalias() = ops::as_matrix(probs[h]) * V;
  }
  return out;
}

/// Accumulates dQ, dK, dV from the gradient of the merged attention output.
template <typename T>
void attention_backward(const AttnOperands<T>& a, const std::vector<BasicTensor<T>>& probs, const BasicTensor<T>& dout,
                        std::int64_t dim, std::int64_t heads, const AttnGrads<T>& g) {
  const auto dh = dim / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  for (std::int64_t h = 0; h < heads; ++h) {
    const auto Q = window(a.q, a.n, h * dh, dh, a.ld_q);
    const auto K = window(a.k, a.m, h * dh, dh, a.ld_k);
    const auto V = window(a.v, a.m, h * dh, dh, a.ld_v);
    const auto dO = window(dout.ptr(), a.n, h * dh, dh, dim);
    const auto P = ops::as_matrix(probs[h]);
    BasicTensor<T> dP(Shape{a.n, a.m});
    ops::as_matrix(dP).noalias() = dO * V.transpose();
    window(g.dv, a.m, h * dh, dh, g.ld_v).noalias() += P.transpose() * dO;
    auto dS = ops::softmax_backward(probs[h], dP);
    auto dSm = ops::as_matrix(dS);
    dSm *= inv_sqrt;
    window(g.dq, a.n, h * dh, dh, g.ld_q).noalias() += dSm * K;
    window(g.dk, a.m, h * dh, dh, g.ld_k).noalias() += dSm.transpose() * Q;
  }
}

template <typename P>
struct BlockView {
  P *ada_w, *ada_b, *n1_g, *n1_b, *qkv_w, *proj_w, *proj_b, *n2_g, *n2_b, *q_w, *q_b, *kv_w,
      *cproj_w, *cproj_b, *n3_g, *n3_b, *fc1_w, *fc1_b, *fc2_w, *fc2_b;
};

template <typename P, typename Store>
BlockView<P> block_view(Store& s, const std::string& pre) {
  return {&s.at(pre + "ada.weight"),        &s.at(pre + "ada.bias"),        &s.at(pre + "norm1.gamma"),
          &s.at(pre + "norm1.beta"),        &s.at(pre + "attn.qkv.weight"), &s.at(pre + "attn.proj.weight"),
          &s.at(pre + "attn.proj.bias"),    &s.at(pre + "norm2.gamma"),     &s.at(pre + "norm2.beta"),
          &s.at(pre + "cross.q.weight"),    &s.at(pre + "cross.q.bias"),    &s.at(pre + "cross.kv.weight"),
          &s.at(pre + "cross.proj.weight"),
          &s.at(pre + "cross.proj.bias"),   &s.at(pre + "norm3.gamma"),     &s.at(pre + "norm3.beta"),
          &s.at(pre + "mlp.fc1.weight"),    &s.at(pre + "mlp.fc1.bias"),    &s.at(pre + "mlp.fc2.weight"),
          &s.at(pre + "mlp.fc2.bias")};
}

// The fused projections that produce attention keys carry no bias: a key bias
// shifts every score of a query by the same amount and cancels in the softmax.
template <typename T>
struct BlockCache {
  // modulation chunks: shift1, 1+scale1, gate1, shift2, 1+scale2, gate2
  std::vector<BasicTensor<T>> mod;
  ops::LayerNormCache<T> ln1, ln2, ln3;
  BasicTensor<T> a1, m1, qkv, sa_merged, sa_out;
  BasicTensor<T> a2, q, kv, ca_merged;
  BasicTensor<T> a3, m3, f1, g1, f2;
  std::vector<BasicTensor<T>> sa_probs, ca_probs;
};

template <typename T>
BasicTensor<T> mod_chunk(const BasicTensor<T>& mod, std::int64_t i, std::int64_t d, T offset) {
  BasicTensor<T> out(Shape{d});
  for (std::int64_t c = 0; c < d; ++c) out[c] = mod[i * d + c] + offset;
  return out;
}

template <typename T, typename P>
BasicTensor<T> block_forward(const BlockView<P>& b, const BasicTensor<T>& h, const BasicTensor<T>& text,
                             const BasicTensor<T>& cond, std::int64_t heads, BlockCache<T>& c) {
  const auto d = h.dim(1);
  const auto n = h.dim(0);
  const auto s = text.dim(0);
  const auto mod = ops::linear(cond, b.ada_w->value, b.ada_b->value);
  c.mod.clear();
  for (std::int64_t i = 0; i < 6; ++i) c.mod.push_back(mod_chunk(mod, i, d, (i == 1 || i == 4) ? T(1) : T(0)));

  c.a1 = ops::layer_norm(h, b.n1_g->value, b.n1_b->value, &c.ln1);
  c.m1 = ops::add_row(ops::mul_row(c.a1, c.mod[1]), c.mod[0]);
  c.qkv = ops::matmul(c.m1, b.qkv_w->value);
  const AttnOperands<T> sa{c.qkv.ptr(), 3 * d, c.qkv.ptr() + d, 3 * d, c.qkv.ptr() + 2 * d, 3 * d, n, n};
  c.sa_merged = attention(sa, d, heads, c.sa_probs);
  c.sa_out = ops::linear(c.sa_merged, b.proj_w->value, b.proj_b->value);
  auto h1 = ops::add(h, ops::mul_row(c.sa_out, c.mod[2]));

  c.a2 = ops::layer_norm(h1, b.n2_g->value, b.n2_b->value, &c.ln2);
  c.q = ops::linear(c.a2, b.q_w->value, b.q_b->value);
  c.kv = ops::matmul(text, b.kv_w->value);
  const AttnOperands<T> ca{c.q.ptr(), d, c.kv.ptr(), 2 * d, c.kv.ptr() + d, 2 * d, n, s};
  c.ca_merged = attention(ca, d, heads, c.ca_probs);
  auto h2 = ops::add(h1, ops::linear(c.ca_merged, b.cproj_w->value, b.cproj_b->value));

  c.a3 = ops::layer_norm(h2, b.n3_g->value, b.n3_b->value, &c.ln3);
  c.m3 = ops::add_row(ops::mul_row(c.a3, c.mod[4]), c.mod[3]);
  c.f1 = ops::linear(c.m3, b.fc1_w->value, b.fc1_b->value);
  c.g1 = ops::gelu(c.f1);
  c.f2 = ops::linear(c.g1, b.fc2_w->value, b.fc2_b->value);
  return ops::add(h2, ops::mul_row(c.f2, c.mod[5]));
}

/// Gradient wrt the block input. Parameter gradients go to trainable sinks;
/// dtext / dcond are accumulated when non-null.
template <typename T>
BasicTensor<T> block_backward(const BlockView<Param<T>>& b, const BlockCache<T>& c, const BasicTensor<T>& text,
                              const BasicTensor<T>& cond, const BasicTensor<T>& dout, std::int64_t heads,
                              BasicTensor<T>* dtext, BasicTensor<T>* dcond) {
  const auto d = dout.dim(1);
  const auto n = dout.dim(0);
  const auto s = text.dim(0);
  std::vector<BasicTensor<T>> dmod(6);

  // MLP branch
  BasicTensor<T> dh = dout;
  auto df2 = ops::mul_row(dout, c.mod[5]);
  dmod[5] = ops::sum_rows(ops::mul(dout, c.f2));
  auto dg1 = ops::linear_backward(c.g1, b.fc2_w->value, df2, b.fc2_w->grad_sink(), b.fc2_b->grad_sink());
  auto df1 = ops::gelu_backward(c.f1, dg1);
  auto dm3 = ops::linear_backward(c.m3, b.fc1_w->value, df1, b.fc1_w->grad_sink(), b.fc1_b->grad_sink());
  auto mg = ops::mul_row_backward(c.a3, c.mod[4], dm3);
  dmod[4] = std::move(mg.db);
  dmod[3] = ops::sum_rows(dm3);
  ops::accumulate(dh, ops::layer_norm_backward(c.ln3, b.n3_g->value, mg.da, b.n3_g->grad_sink(), b.n3_b->grad_sink()));

  // cross-attention branch
  auto dca = ops::linear_backward(c.ca_merged, b.cproj_w->value, dh, b.cproj_w->grad_sink(), b.cproj_b->grad_sink());
  BasicTensor<T> dq(c.q.shape());
  BasicTensor<T> dkv(c.kv.shape());
  const AttnOperands<T> ca{c.q.ptr(), d, c.kv.ptr(), 2 * d, c.kv.ptr() + d, 2 * d, n, s};
  attention_backward(ca, c.ca_probs, dca, d, heads, AttnGrads<T>{dq.ptr(), d, dkv.ptr(), 2 * d, dkv.ptr() + d, 2 * d});
  auto da2 = ops::linear_backward(c.a2, b.q_w->value, dq, b.q_w->grad_sink(), b.q_b->grad_sink());
  auto dt = ops::linear_backward(text, b.kv_w->value, dkv, b.kv_w->grad_sink(), static_cast<Buffer<T>*>(nullptr), dtext != nullptr);
  if (dtext) ops::accumulate(*dtext, dt);
  ops::accumulate(dh, ops::layer_norm_backward(c.ln2, b.n2_g->value, da2, b.n2_g->grad_sink(), b.n2_b->grad_sink()));

  // self-attention branch
  auto dsa = ops::mul_row(dh, c.mod[2]);
  dmod[2] = ops::sum_rows(ops::mul(dh, c.sa_out));
  auto dmerged = ops::linear_backward(c.sa_merged, b.proj_w->value, dsa, b.proj_w->grad_sink(), b.proj_b->grad_sink());
  BasicTensor<T> dqkv(c.qkv.shape());
  const AttnOperands<T> sa{c.qkv.ptr(), 3 * d, c.qkv.ptr() + d, 3 * d, c.qkv.ptr() + 2 * d, 3 * d, n, n};
  attention_backward(sa, c.sa_probs, dmerged, d, heads,
                     AttnGrads<T>{dqkv.ptr(), 3 * d, dqkv.ptr() + d, 3 * d, dqkv.ptr() + 2 * d, 3 * d});
  auto dm1 = ops::linear_backward(c.m1, b.qkv_w->value, dqkv, b.qkv_w->grad_sink(), static_cast<Buffer<T>*>(nullptr));
  auto mg1 = ops::mul_row_backward(c.a1, c.mod[1], dm1);
  dmod[1] = std::move(mg1.db);
  dmod[0] = ops::sum_rows(dm1);
  ops::accumulate(dh, ops::layer_norm_backward(c.ln1, b.n1_g->value, mg1.da, b.n1_g->grad_sink(), b.n1_b->grad_sink()));

  // modulation
  const auto dmod_row = ops::concat_list(dmod, 0).reshaped(Shape{1, 6 * d});
  auto dc = ops::linear_backward(cond, b.ada_w->value, dmod_row, b.ada_w->grad_sink(), b.ada_b->grad_sink(),
                                 dcond != nullptr);
  if (dcond) ops::accumulate(*dcond, dc);
  return dh;
}

template <typename T>
BasicTensor<T> timestep_features(T t, std::int64_t dim) {
  BasicTensor<T> out(Shape{1, dim});
  const auto half = dim / 2;
  const double pos = 1000.0 * static_cast<double>(t);
  for (std::int64_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = static_cast<T>(std::sin(pos * freq));
    out[half + i] = static_cast<T>(std::cos(pos * freq));
  }
  return out;
}

template <typename T>
struct Trace {
  BasicTensor<T> text, temb, t1, t1g, craw, cond;
  BasicTensor<T> x_emb, ctx_emb;
  std::vector<BlockCache<T>> main, ctx;
  std::vector<BasicTensor<T>> ctx_out;
  std::vector<std::int64_t> placement;
  ops::LayerNormCache<T> lnf;
  BasicTensor<T> lnf_out, fshift, fscale1p, y, out;
};

template <typename T, typename P>
BasicTensor<T> linear_embed(const P& w, const P& b, const BasicTensor<T>& rows, const BasicTensor<T>& pos) {
  return ops::add(ops::linear(rows, w.value, b.value), pos);
}

/// xc Wc + xk Wk + m Wm + b + pos over the column windows of the context rows.
template <typename T, typename Store>
BasicTensor<T> context_embed(const Store& s, const ModelConfig& cfg, const BasicTensor<T>& rows,
                             const BasicTensor<T>& pos) {
  const auto p = cfg.patch_dim();
  const auto pm = cfg.patch_volume();
  if (rows.rank() != 2 || rows.dim(1) != cfg.context_dim() || rows.dim(0) != pos.dim(0)) {
    ops::dim_error("embed_context", rows.shape(), Shape{pos.dim(0), cfg.context_dim()});
  }
  const auto n = rows.dim(0);
  const auto ld = rows.dim(1);
  BasicTensor<T> out = pos;
  auto O = ops::as_matrix(out);
  O.noalias() += window(rows.ptr(), n, 0, p, ld) * ops::as_matrix(s.at("context_embedder.weight_c").value);
  O.noalias() += window(rows.ptr(), n, p, p, ld) * ops::as_matrix(s.at("context_embedder.weight_k").value);
  O.noalias() += window(rows.ptr(), n, 2 * p, pm, ld) * ops::as_matrix(s.at("context_embedder.weight_m").value);
  const auto& b = s.at("context_embedder.bias").value;
  O.rowwise() += Eigen::Map<const ops::RowVec<T>>(b.ptr(), b.size());
  return out;
}

template <typename T>
void context_embed_backward(BasicParamStore<T>& s, const ModelConfig& cfg, const BasicTensor<T>& rows,
                            const BasicTensor<T>& g) {
  const auto p = cfg.patch_dim();
  const auto pm = cfg.patch_volume();
  const auto n = rows.dim(0);
  const auto ld = rows.dim(1);
  auto G = ops::as_matrix(g);
  auto sink = [&](const char* name, std::int64_t col, std::int64_t cols) {
    auto& prm = s.at(name);
    if (auto* dw = prm.grad_sink()) {
      ops::MatMap<T>(dw->data(), cols, g.dim(1)).noalias() += window(rows.ptr(), n, col, cols, ld).transpose() * G;
    }
  };
  sink("context_embedder.weight_c", 0, p);
  sink("context_embedder.weight_k", p, p);
  sink("context_embedder.weight_m", 2 * p, pm);
  if (auto* db = s.at("context_embedder.bias").grad_sink()) ops::accumulate(*db, ops::sum_rows(g));
}

template <typename T, typename Store>
BasicTensor<T> run_forward(const Store& s, const ModelConfig& cfg, const ModelInput<T>& in, Trace<T>& tr) {
  const auto d = cfg.model_dim;
  const auto n = in.grid.total_tokens();
  if (in.noisy.rank() != 2 || in.noisy.dim(0) != n || in.noisy.dim(1) != cfg.patch_dim()) {
    ops::dim_error("forward: noisy tokens", in.noisy.shape(), Shape{n, cfg.patch_dim()});
  }
  if (cfg.mode != ModelMode::base && (in.context.rank() != 2 || in.context.dim(0) != n)) {
    ops::dim_error("forward: context tokens", in.context.shape(), in.noisy.shape());
  }
  if (!std::isfinite(static_cast<double>(in.t))) throw ArgumentError("forward: timestep is not finite");
  if (static_cast<std::int64_t>(in.text_ids.size()) != cfg.max_text_tokens) {
    throw DimensionError("forward: expected " + std::to_string(cfg.max_text_tokens) + " text ids, got " +
                         std::to_string(in.text_ids.size()));
  }

  tr.text = ops::embedding(s.at("text_embed.table").value, in.text_ids);
  tr.temb = timestep_features(in.t, d);
  tr.t1 = ops::linear(tr.temb, s.at("time_mlp.fc1.weight").value, s.at("time_mlp.fc1.bias").value);
  tr.t1g = ops::gelu(tr.t1);
  tr.craw = ops::linear(tr.t1g, s.at("time_mlp.fc2.weight").value, s.at("time_mlp.fc2.bias").value);
  tr.cond = ops::gelu(tr.craw);

  const auto pos = positional_encoding<T>(in.grid, d);
  tr.x_emb = linear_embed(s.at("main_patchify.weight"), s.at("main_patchify.bias"), in.noisy, pos);
  BasicTensor<T> h = tr.x_emb;
  if (cfg.mode != ModelMode::base) tr.ctx_emb = context_embed(s, cfg, in.context, pos);
  if (cfg.mode == ModelMode::fullft) ops::accumulate(h, tr.ctx_emb);

  tr.placement.clear();
  tr.ctx.clear();
  tr.ctx_out.clear();
  if (cfg.mode == ModelMode::adapter) {
    tr.placement = resolve_placement(cfg.placement, cfg.layers);
    tr.ctx.resize(tr.placement.size());
    const BasicTensor<T>* c = &tr.ctx_emb;
    for (std::size_t j = 0; j < tr.placement.size(); ++j) {
      const auto view = block_view<const Param<T>>(s, context_block(static_cast<std::int64_t>(j)));
      tr.ctx_out.push_back(block_forward(view, *c, tr.text, tr.cond, cfg.heads, tr.ctx[j]));
      c = &tr.ctx_out.back();
    }
  }

  tr.main.resize(static_cast<std::size_t>(cfg.layers));
  std::size_t next = 0;
  for (std::int64_t i = 0; i < cfg.layers; ++i) {
    const auto view = block_view<const Param<T>>(s, main_block(i));
    h = block_forward(view, h, tr.text, tr.cond, cfg.heads, tr.main[static_cast<std::size_t>(i)]);
    if (next < tr.placement.size() && tr.placement[next] == i) {
      const auto pre = context_block(static_cast<std::int64_t>(next));
      ops::accumulate(h, ops::linear(tr.ctx_out[next], s.at(pre + "gate.weight").value, s.at(pre + "gate.bias").value));
      ++next;
    }
  }

  const auto fmod = ops::linear(tr.cond, s.at("final.ada.weight").value, s.at("final.ada.bias").value);
  tr.fshift = mod_chunk(fmod, 0, d, T(0));
  tr.fscale1p = mod_chunk(fmod, 1, d, T(1));
  tr.lnf_out = ops::layer_norm(h, s.at("final.norm.gamma").value, s.at("final.norm.beta").value, &tr.lnf);
  tr.y = ops::add_row(ops::mul_row(tr.lnf_out, tr.fscale1p), tr.fshift);
  return ops::linear(tr.y, s.at("final.proj.weight").value, s.at("final.proj.bias").value);
}

template <typename T>
void run_backward(BasicParamStore<T>& s, const ModelConfig& cfg, const ModelInput<T>& in, const Trace<T>& tr,
                  const BasicTensor<T>& dout) {
  const auto d = cfg.model_dim;
  const bool backbone_trains = cfg.mode != ModelMode::adapter;
  const bool text_trains = s.at("text_embed.table").trainable;
  const bool time_trains = s.at("time_mlp.fc1.weight").trainable || s.at("time_mlp.fc2.weight").trainable ||
                           s.at("time_mlp.fc1.bias").trainable || s.at("time_mlp.fc2.bias").trainable;
  BasicTensor<T> dtext(tr.text.shape());
  BasicTensor<T> dcond(tr.cond.shape());
  BasicTensor<T>* dtext_ptr = text_trains ? &dtext : nullptr;
  BasicTensor<T>* dcond_ptr = time_trains ? &dcond : nullptr;

  auto dy = ops::linear_backward(tr.y, s.at("final.proj.weight").value, dout, s.at("final.proj.weight").grad_sink(),
                                 s.at("final.proj.bias").grad_sink());
  auto fg = ops::mul_row_backward(tr.lnf_out, tr.fscale1p, dy);
  {
    const auto dfmod = ops::concat_list<T>({ops::sum_rows(dy), fg.db}, 0).reshaped(Shape{1, 2 * d});
    auto dc = ops::linear_backward(tr.cond, s.at("final.ada.weight").value, dfmod, s.at("final.ada.weight").grad_sink(),
                                   s.at("final.ada.bias").grad_sink(), dcond_ptr != nullptr);
    if (dcond_ptr) ops::accumulate(dcond, dc);
  }
  auto dh = ops::layer_norm_backward(tr.lnf, s.at("final.norm.gamma").value, fg.da,
                                     s.at("final.norm.gamma").grad_sink(), s.at("final.norm.beta").grad_sink());

  // Main branch, top down. With a frozen backbone nothing below the lowest
  // injection point needs a gradient.
  std::vector<BasicTensor<T>> dinj(tr.placement.size());
  const std::int64_t stop = backbone_trains || tr.placement.empty() ? -1 : tr.placement.front();
  std::int64_t j = static_cast<std::int64_t>(tr.placement.size()) - 1;
  for (std::int64_t i = cfg.layers - 1; i >= 0; --i) {
    if (j >= 0 && tr.placement[static_cast<std::size_t>(j)] == i) {
      const auto pre = context_block(j);
      auto& gw = s.at(pre + "gate.weight");
      dinj[static_cast<std::size_t>(j)] =
          ops::linear_backward(tr.ctx_out[static_cast<std::size_t>(j)], gw.value, dh, gw.grad_sink(),
                               s.at(pre + "gate.bias").grad_sink());
      --j;
    }
    if (i == stop) break;
    const auto view = block_view<Param<T>>(s, main_block(i));
    dh = block_backward(view, tr.main[static_cast<std::size_t>(i)], tr.text, tr.cond, dh, cfg.heads,
                        backbone_trains ? dtext_ptr : nullptr, backbone_trains ? dcond_ptr : nullptr);
  }

  BasicTensor<T> dctx;
  if (cfg.mode == ModelMode::adapter) {
    BasicTensor<T> dc;
    for (std::int64_t k = static_cast<std::int64_t>(tr.placement.size()) - 1; k >= 0; --k) {
      auto& g = dinj[static_cast<std::size_t>(k)];
      if (!dc.empty()) ops::accumulate(g, dc);
      const auto view = block_view<Param<T>>(s, context_block(k));
      dc = block_backward(view, tr.ctx[static_cast<std::size_t>(k)], tr.text, tr.cond, g, cfg.heads, dtext_ptr,
                          dcond_ptr);
    }
    dctx = std::move(dc);
  } else if (cfg.mode == ModelMode::fullft) {
    dctx = dh;
  }
  if (cfg.mode != ModelMode::base) context_embed_backward(s, cfg, in.context, dctx);

  if (backbone_trains) {
    ops::linear_backward(in.noisy, s.at("main_patchify.weight").value, dh, s.at("main_patchify.weight").grad_sink(),
                         s.at("main_patchify.bias").grad_sink(), false);
  }
  if (dtext_ptr) ops::embedding_backward(dtext, in.text_ids, s.at("text_embed.table").value.grad());
  if (dcond_ptr) {
    auto dcraw = ops::gelu_backward(tr.craw, dcond);
    auto dt1g = ops::linear_backward(tr.t1g, s.at("time_mlp.fc2.weight").value, dcraw,
                                     s.at("time_mlp.fc2.weight").grad_sink(), s.at("time_mlp.fc2.bias").grad_sink());
    auto dt1 = ops::gelu_backward(tr.t1, dt1g);
    ops::linear_backward(tr.temb, s.at("time_mlp.fc1.weight").value, dt1, s.at("time_mlp.fc1.weight").grad_sink(),
                         s.at("time_mlp.fc1.bias").grad_sink(), false);
  }
}

template <typename T>
T mse(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) ops::dim_error("loss", pred.shape(), target.shape());
  T total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - target[i]) * (pred[i] - target[i]);
  return total / static_cast<T>(pred.size());
}

}  // namespace

template <typename T>
BasicTensor<T> forward(const BasicParamStore<T>& params, const ModelConfig& cfg, const ModelInput<T>& input) {
  Trace<T> tr;
  return run_forward(params, cfg, input, tr);
}

template <typename T>
T loss_only(const BasicParamStore<T>& params, const ModelConfig& cfg, const ModelInput<T>& input,
            const BasicTensor<T>& target) {
  return mse(forward(params, cfg, input), target);
}

template <typename T>
T loss_and_grad(BasicParamStore<T>& params, const ModelConfig& cfg, const ModelInput<T>& input,
                const BasicTensor<T>& target) {
  Trace<T> tr;
  const auto out = run_forward(params, cfg, input, tr);
  const T loss = mse(out, target);
  BasicTensor<T> dout(out.shape());
  const T k = T(2) / static_cast<T>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) dout[i] = k * (out[i] - target[i]);
  run_backward(params, cfg, input, tr, dout);
  return loss;
}

template BasicTensor<float> forward<float>(const BasicParamStore<float>&, const ModelConfig&, const ModelInput<float>&);
template BasicTensor<double> forward<double>(const BasicParamStore<double>&, const ModelConfig&,
                                             const ModelInput<double>&);
template float loss_only<float>(const BasicParamStore<float>&, const ModelConfig&, const ModelInput<float>&,
                                const BasicTensor<float>&);
template double loss_only<double>(const BasicParamStore<double>&, const ModelConfig&, const ModelInput<double>&,
                                  const BasicTensor<double>&);
template float loss_and_grad<float>(BasicParamStore<float>&, const ModelConfig&, const ModelInput<float>&,
                                    const BasicTensor<float>&);
template double loss_and_grad<double>(BasicParamStore<double>&, const ModelConfig&, const ModelInput<double>&,
                                      const BasicTensor<double>&);
template long double loss_and_grad<long double>(BasicParamStore<long double>&, const ModelConfig&,
                                                const ModelInput<long double>&, const BasicTensor<long double>&);
template long double loss_only<long double>(const BasicParamStore<long double>&, const ModelConfig&,
                                            const ModelInput<long double>&, const BasicTensor<long double>&);

Tensor patchify(const ParamStore& params, const LatentGrid& latent, std::int64_t ref_frames, const ModelConfig& cfg) {
  const auto grid = TokenGrid::of(latent, ref_frames, cfg);
  const auto rows = patch_rows<float>(latent, cfg);
  if (rows.dim(1) != cfg.patch_dim()) ops::dim_error("patchify", latent.shape(), Shape{cfg.patch_dim()});
  return linear_embed(params.at("main_patchify.weight"), params.at("main_patchify.bias"), rows,
                      positional_encoding<float>(grid, cfg.model_dim));
}

Tensor embed_context(const LatentBundle& bundle, const ParamStore& params, const ModelConfig& cfg) {
  const auto grid = TokenGrid::of(bundle.x_c, bundle.ref_latent_len, cfg);
  return context_embed(params, cfg, context_rows<float>(bundle, cfg), positional_encoding<float>(grid, cfg.model_dim));
}

ModelInput<float> make_input(const ModelConfig& cfg, const LatentGrid& noisy_latent, const LatentBundle& bundle,
                             const std::vector<std::int64_t>& text_ids, float t) {
  if (noisy_latent.shape() != bundle.x_c.shape()) {
    ops::dim_error("make_input", noisy_latent.shape(), bundle.x_c.shape());
  }
  ModelInput<float> in;
  in.grid = TokenGrid::of(noisy_latent, bundle.ref_latent_len, cfg);
  in.noisy = patch_rows<float>(noisy_latent, cfg);
  in.context = context_rows<float>(bundle, cfg);
  in.text_ids = text_ids;
  in.t = t;
  return in;
}

}  // namespace vace
