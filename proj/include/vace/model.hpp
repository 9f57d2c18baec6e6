// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal diffusion transformer with a context pathway.
//
// Modes:
//   base    - text-to-video backbone; context is ignored (used to produce the
//             frozen model that adapter training starts from)
//   fullft  - context tokens are added to the noisy tokens once, before the
//             block stack; every parameter trains
//   adapter - the backbone runs on noisy tokens only; a cascade of context
//             blocks processes the context tokens and each output is added,
//             through a zero-initialized gate, after its paired main block;
//             only the context embedder and context blocks train

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vace/codec.hpp"
#include "vace/ops.hpp"
#include "vace/rng.hpp"
#include "vace/tensor.hpp"

namespace vace {

enum class ModelMode { base, fullft, adapter };

const char* mode_name(ModelMode mode);
ModelMode parse_mode(const std::string& text);

struct PlacementSpec {
  enum class Strategy { continuous_first, distributed_even, explicit_list };

  Strategy strategy = Strategy::distributed_even;
  std::int64_t count = 4;
  std::vector<std::int64_t> indices;  // explicit_list only

  static PlacementSpec continuous_first(std::int64_t k) { return {Strategy::continuous_first, k, {}}; }
  static PlacementSpec distributed_even(std::int64_t k) { return {Strategy::distributed_even, k, {}}; }
  static PlacementSpec explicit_list(std::vector<std::int64_t> idx) {
    const auto k = static_cast<std::int64_t>(idx.size());
    return {Strategy::explicit_list, k, std::move(idx)};
  }

  /// "continuous:4", "distributed:4" or "explicit:0,3,5".
  std::string str() const;
  static PlacementSpec parse(const std::string& text);

  friend bool operator==(const PlacementSpec&, const PlacementSpec&) = default;
};

/// continuous_first(k) -> [0..k-1]; distributed_even(k) -> [round(i*L/k)];
/// explicit lists are validated (in range, strictly increasing).
std::vector<std::int64_t> resolve_placement(const PlacementSpec& spec, std::int64_t layers);

struct ModelConfig {
  std::int64_t layers = 8;
  std::int64_t model_dim = 128;
  std::int64_t heads = 4;
  std::int64_t patch_t = 1;
  std::int64_t patch_h = 2;
  std::int64_t patch_w = 2;
  std::int64_t mlp_ratio = 4;
  std::int64_t text_buckets = 256;
  std::int64_t max_text_tokens = 16;
  ModelMode mode = ModelMode::adapter;
  PlacementSpec placement = PlacementSpec::distributed_even(4);
  CodecConfig codec;
  /// Route frames through F*M / F*(1-M); off sends everything to the reactive stream.
  bool decouple = true;

  std::int64_t patch_volume() const { return patch_t * patch_h * patch_w; }
  std::int64_t patch_dim() const { return patch_volume() * codec.channels(); }
  std::int64_t context_dim() const { return 2 * patch_dim() + patch_volume(); }
  std::int64_t pad_id() const { return text_buckets; }
  void check() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Token layout of a latent grid whose first `ref_frames` frames are references.
struct TokenGrid {
  std::int64_t ref_frames = 0;
  std::int64_t video_frames = 0;
  std::int64_t height = 0;  // h'
  std::int64_t width = 0;   // w'
  std::int64_t patch_t = 1, patch_h = 2, patch_w = 2;

  std::int64_t frames() const { return ref_frames + video_frames; }
  std::int64_t tokens_per_frame() const { return (height / patch_h) * (width / patch_w); }
  std::int64_t total_tokens() const { return (frames() / patch_t) * tokens_per_frame(); }

  static TokenGrid of(const LatentGrid& latent, std::int64_t ref_frames, const ModelConfig& cfg);
};

// ------------------------------------------------------------------ params

template <typename T>
struct Param {
  BasicTensor<T> value;
  bool trainable = true;

  Buffer<T>* grad_sink() { return trainable ? &value.grad() : nullptr; }
};

/// Named parameters in a deterministic (lexicographic) order.
template <typename T>
class BasicParamStore {
 public:
  void add(const std::string& name, BasicTensor<T> value, bool trainable);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Param<T>& at(const std::string& name);
  const Param<T>& at(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  std::vector<std::string> names() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  std::size_t scalar_count() const;

  template <typename U>
  BasicParamStore<U> cast() const {
    BasicParamStore<U> out;
    for (const auto& [name, p] : params_) out.add(name, p.value.template cast<U>(), p.trainable);
    return out;
  }

 private:
  std::map<std::string, Param<T>> params_;
};

using ParamStore = BasicParamStore<float>;

/// Every parameter name the configuration defines.
std::vector<std::string> param_names(const ModelConfig& cfg);

/// Names that train in cfg.mode. base/fullft: all; adapter: context embedder and context blocks.
std::set<std::string> trainable_mask(const ModelConfig& cfg);

/// Fresh parameters. Zero-initialized: adaLN modulations, final projection,
/// mask embedding weights, adapter gates. Context embedder copies the video
/// embedder; context blocks copy their paired main blocks.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Builds parameters for `cfg` from a trained backbone: every backbone tensor is
/// copied, the context pathway is created as in init_params, flags follow cfg.mode.
ParamStore derive_from_base(const ParamStore& base, const ModelConfig& cfg);

// ------------------------------------------------------------ tokenization

/// FNV-1a 64-bit hash of each whitespace-separated word, modulo text_buckets;
/// truncated/padded to max_text_tokens with pad id = text_buckets.
std::vector<std::int64_t> text_tokens(const std::string& prompt, const ModelConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);

/// (F, h', w', C) -> (N, p_t*p_h*p_w*C) rows in token order (frame, row, col),
/// each row flattened as (dt, dy, dx, c).
template <typename T>
BasicTensor<T> patch_rows(const Tensor& grid, const ModelConfig& cfg);

/// Inverse of patch_rows.
template <typename T>
Tensor unpatch_rows(const BasicTensor<T>& rows, const TokenGrid& grid, std::int64_t channels);

/// Sinusoidal (frame, row, col) encoding, (N, D). The leading model_dim - 2q
/// features encode the frame index, then q for the row and q for the column,
/// q = 2 * floor(D / 6). Within a group of width c, feature 2i is
/// sin(pos / 10000^(2i/c)) and 2i+1 the matching cosine.
template <typename T>
BasicTensor<T> positional_encoding(const TokenGrid& grid, std::int64_t model_dim);

/// [x_c | x_k | m_lat] patch rows, (N, 2P + p_t*p_h*p_w).
template <typename T>
BasicTensor<T> context_rows(const LatentBundle& bundle, const ModelConfig& cfg);

/// Video embedder: patch rows projected to D plus positional encoding.
Tensor patchify(const ParamStore& params, const LatentGrid& latent, std::int64_t ref_frames, const ModelConfig& cfg);

/// Context embedder output (N, D).
Tensor embed_context(const LatentBundle& bundle, const ParamStore& params, const ModelConfig& cfg);

// ------------------------------------------------------------------ forward

template <typename T>
struct ModelInput {
  BasicTensor<T> noisy;    // (N, P) patch rows of the noisy latent
  BasicTensor<T> context;  // (N, context_dim) rows; ignored in base mode
  std::vector<std::int64_t> text_ids;
  T t = 0;
  TokenGrid grid;
};

/// Velocity prediction in patch-row layout, same shape as input.noisy.
template <typename T>
BasicTensor<T> forward(const BasicParamStore<T>& params, const ModelConfig& cfg, const ModelInput<T>& input);

/// Mean-squared error between forward(...) and target velocity rows. Gradients
/// of the loss are accumulated into the grad slot of every trainable parameter.
template <typename T>
T loss_and_grad(BasicParamStore<T>& params, const ModelConfig& cfg, const ModelInput<T>& input,
                const BasicTensor<T>& target);

/// Loss only.
template <typename T>
T loss_only(const BasicParamStore<T>& params, const ModelConfig& cfg, const ModelInput<T>& input,
            const BasicTensor<T>& target);

/// Assembles the model input for a latent grid and a Vcu's context.
ModelInput<float> make_input(const ModelConfig& cfg, const LatentGrid& noisy_latent, const LatentBundle& bundle,
                             const std::vector<std::int64_t>& text_ids, float t);

}  // namespace vace
