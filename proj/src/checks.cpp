// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>

#include "vace/codec.hpp"
#include "vace/datagen.hpp"
#include "vace/sampler.hpp"
#include "vace/train.hpp"
#include "vace/vcu.hpp"

namespace vace::checks {
namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(float)) == 0;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (float v : t.data()) m = std::max(m, static_cast<double>(std::abs(v)));
  return m;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

// Times `body`, which fills passed/detail.
CheckResult timed(std::string name, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.name = std::move(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Tensor binary_masks(Rng& rng, const Shape& shape) {
  Tensor m(shape);
  for (auto& v : m.data()) v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  return m;
}

// Expected layout of a Vcu with references `refs` in front of video frames
// `video` (null: zero frames) and video masks `masks` (null: all ones).
std::string layout_mismatch(const Vcu& v, const Tensor& refs, const Tensor* video, const Tensor* masks,
                            std::int64_t n, std::int64_t h, std::int64_t w) {
  const auto l = refs.dim(0);
  if (v.ref_count != l || v.video_len != n) return "ref_count/video_len";
  if (v.frames.shape() != Shape{l + n, h, w, 3} || v.masks.shape() != Shape{l + n, h, w}) return "shape";
  for (std::int64_t f = 0; f < l + n; ++f) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        const float m = f < l ? 0.0f : masks ? masks->at({f - l, y, x}) : 1.0f;
        if (v.masks.at({f, y, x}) != m) return "mask at frame " + std::to_string(f);
        for (std::int64_t c = 0; c < 3; ++c) {
          const float e = f < l ? refs.at({f, y, x, c}) : video ? video->at({f - l, y, x, c}) : 0.0f;
          if (v.frames.at({f, y, x, c}) != e) return "frame value at frame " + std::to_string(f);
        }
      }
    }
  }
  if (!validate(v).empty()) return "validate: " + validate(v).front().message;
  return "";
}

}  // namespace

ModelConfig tiny_config(ModelMode mode) {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.model_dim = 16;
  cfg.heads = 2;
  cfg.patch_h = 1;
  cfg.patch_w = 1;
  cfg.text_buckets = 8;
  cfg.max_text_tokens = 4;
  cfg.mode = mode;
  cfg.placement = PlacementSpec::distributed_even(2);
  return cfg;
}

LatentBundle random_bundle(Rng& rng, const ModelConfig& cfg, std::int64_t frames, std::int64_t refs, std::int64_t h,
                           std::int64_t w) {
  const auto d = cfg.codec.channels();
  LatentBundle b;
  b.x_c = normal<float>(rng, {frames, h, w, d});
  b.x_k = normal<float>(rng, {frames, h, w, d});
  b.m_lat = uniform<float>(rng, {frames, h, w, 1}, 0.0, 1.0);
  b.ref_latent_len = refs;
  return b;
}

ModelInput<float> random_input(Rng& rng, const ModelConfig& cfg, std::int64_t frames, std::int64_t refs,
                               std::int64_t h, std::int64_t w) {
  const auto bundle = random_bundle(rng, cfg, frames, refs, h, w);
  const auto noisy = normal<float>(rng, {frames, h, w, cfg.codec.channels()});
  std::vector<std::int64_t> ids(static_cast<std::size_t>(cfg.max_text_tokens));
  for (auto& id : ids) id = rng.uniform_int(0, cfg.text_buckets);
  return make_input(cfg, noisy, bundle, ids, static_cast<float>(rng.uniform()));
}

std::map<std::string, GradErrors> model_grad_errors(const ParamStore& params, const ModelConfig& cfg,
                                                    const ModelInput<float>& input, const Tensor& target, double eps) {
  using X = long double;
  auto ref = params.cast<X>();
  auto p32 = params;
  auto p64 = params.cast<double>();
  ModelInput<X> in_x{input.noisy.cast<X>(), input.context.cast<X>(), input.text_ids, static_cast<X>(input.t),
                     input.grid};
  ModelInput<double> in64{input.noisy.cast<double>(), input.context.cast<double>(), input.text_ids,
                          static_cast<double>(input.t), input.grid};
  const auto target_x = target.cast<X>();
  const auto target64 = target.cast<double>();

  p32.zero_grad();
  loss_and_grad(p32, cfg, input, target);
  p64.zero_grad();
  loss_and_grad(p64, cfg, in64, target64);

  std::map<std::string, GradErrors> out;
  for (const auto& name : params.names()) {
    if (!params.at(name).trainable) continue;
    const auto x0 = ref.at(name).value;
    const auto central = central_differences<X>(
        [&](const BasicTensor<X>& x) {
          ref.at(name).value = x;
          return BasicTensor<X>::scalar(loss_only(ref, cfg, in_x, target_x));
        },
        x0, eps);
    ref.at(name).value = x0;
    const auto& g32 = p32.at(name).value.grad();
    const auto& g64 = p64.at(name).value.grad();
    out[name].f32 = max_relative_error(BasicTensor<X>(x0.shape(), std::vector<X>(g32.begin(), g32.end())), central);
    out[name].f64 = max_relative_error(BasicTensor<X>(x0.shape(), std::vector<X>(g64.begin(), g64.end())), central);
  }
  return out;
}

CheckResult codec_roundtrip(std::uint64_t seed) {
  auto r = timed("codec roundtrip", [&](CheckResult& r) {
    Rng rng(seed);
    const CodecConfig cfg;
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
      const auto n = cfg.temporal_stride * rng.uniform_int(1, 4);
      const auto h = cfg.spatial_stride * rng.uniform_int(1, 8);
      const auto w = cfg.spatial_stride * rng.uniform_int(1, 8);
      const auto video = uniform<float>(rng, {n, h, w, 3}, -1.0, 1.0);
      if (!bitwise_equal(decode_video(encode_video(video, cfg), cfg), video)) ++bad;
    }
    r.passed = bad == 0;
    r.detail = std::to_string(100 - bad) + "/100 videos bitwise identical";
  });
  r.passed = r.passed && r.seconds < 5.0;
  return r;
}

CheckResult vcu_algebra() {
  auto r = timed("VCU algebra", [&](CheckResult& r) {
    Rng rng(7);
    const std::int64_t h = 4, w = 4;
    int cases = 0;
    std::string failure;
    auto expect = [&](const std::string& what, const std::string& mismatch) {
      ++cases;
      if (!mismatch.empty() && failure.empty()) failure = what + ": " + mismatch;
    };
    for (std::int64_t l = 0; l <= 3; ++l) {
      for (std::int64_t n = 1; n <= 8; ++n) {
        const auto refs = uniform<float>(rng, {l, h, w, 3}, -1.0, 1.0);
        const auto video = uniform<float>(rng, {n, h, w, 3}, -1.0, 1.0);
        const auto masks = binary_masks(rng, {n, h, w});
        auto add_refs = [&](const Vcu& v) { return l ? with_references(v, refs) : v; };
        const std::string at = " (l=" + std::to_string(l) + ", n=" + std::to_string(n) + ")";
        const auto t2v = add_refs(make_t2v("p", n, h, w));
        expect("t2v" + at, layout_mismatch(t2v, refs, nullptr, nullptr, n, h, w));
        expect("v2v" + at, layout_mismatch(add_refs(make_v2v("p", video)), refs, &video, nullptr, n, h, w));
        expect("mv2v" + at, layout_mismatch(add_refs(make_mv2v("p", video, masks)), refs, &video, &masks, n, h, w));
        if (l > 0) {
          const auto r2v = make_r2v("p", refs, n);
          expect("r2v" + at, layout_mismatch(r2v, refs, nullptr, nullptr, n, h, w));
          expect("with_references(t2v) == r2v" + at, same_layout(t2v, r2v) ? "" : "layouts differ");
        }
      }
    }
    r.passed = failure.empty();
    r.detail = r.passed ? std::to_string(cases) + " layouts match for l in 0..3, n in 1..8" : failure;
  });
  r.passed = r.passed && r.seconds < 5.0;
  return r;
}

CheckResult decouple_partition(std::uint64_t seed) {
  return timed("decouple partition", [&](CheckResult& r) {
    Rng rng(seed);
    int bad = 0;
    for (int i = 0; i < 50; ++i) {
      const auto n = rng.uniform_int(1, 8), h = rng.uniform_int(1, 16), w = rng.uniform_int(1, 16);
      const auto f = uniform<float>(rng, {n, h, w, 3}, -1.0, 1.0);
      const auto m = binary_masks(rng, {n, h, w});
      const auto parts = decouple(f, m);
      bool ok = true;
      for (std::size_t j = 0; j < f.size(); ++j) {
        ok = ok && parts.reactive[j] + parts.inactive[j] == f[j] && parts.reactive[j] * parts.inactive[j] == 0.0f;
      }
      if (!ok) ++bad;
    }
    r.passed = bad == 0;
    r.detail = std::to_string(50 - bad) + "/50 cases: F_c + F_k == F and F_c * F_k == 0";
  });
}

CheckResult zero_init_identity(std::uint64_t seed) {
  return timed("zero-init identity", [&](CheckResult& r) {
    Rng rng(seed);
    double worst = 0.0;
    for (auto mode : {ModelMode::fullft, ModelMode::adapter}) {
      ModelConfig cfg;
      cfg.mode = mode;
      const auto params = init_params(cfg, rng.next_u64());
      for (int i = 0; i < 20; ++i) {
        const auto refs = static_cast<std::int64_t>(i % 3);
        worst = std::max(worst, max_abs(forward(params, cfg, random_input(rng, cfg, refs + 4, refs, 8, 8))));
      }
    }
    // A backbone with live outputs, gates at zero: the context pathway must not leak.
    ModelConfig cfg;
    cfg.mode = ModelMode::adapter;
    auto params = init_params(cfg, rng.next_u64());
    jitter(params, rng, 0.05);
    for (auto& [name, p] : params) {
      if (name.find(".gate.") != std::string::npos) p.value.fill(0.0f);
    }
    const auto input = random_input(rng, cfg, 5, 1, 8, 8);
    const auto before = forward(params, cfg, input);
    for (auto& [name, p] : params) {
      if (name.rfind("context_", 0) == 0 && name.find(".gate.") == std::string::npos) {
        for (auto& v : p.value.data()) v += static_cast<float>(rng.normal());
      }
    }
    const bool unchanged = bitwise_equal(before, forward(params, cfg, input));
    r.passed = worst <= 1e-7 && unchanged && max_abs(before) > 0.0;
    r.detail = "max |output| at init " + fmt(worst) + " over 40 inputs; context perturbation with zero gates " +
               (unchanged ? "leaves output bitwise unchanged" : "CHANGES the output");
  });
}

CheckResult mask_neutrality(std::uint64_t seed) {
  return timed("mask-channel neutrality", [&](CheckResult& r) {
    Rng rng(seed);
    int bad = 0, cases = 0;
    for (auto mode : {ModelMode::fullft, ModelMode::adapter}) {
      ModelConfig cfg;
      cfg.mode = mode;
      const auto params = init_params(cfg, rng.next_u64());
      for (int i = 0; i < 10; ++i, ++cases) {
        auto bundle = random_bundle(rng, cfg, 5, 1, 8, 8);
        const auto before = embed_context(bundle, params, cfg);
        bundle.m_lat = uniform<float>(rng, bundle.m_lat.shape(), 0.0, 1.0);
        if (!bitwise_equal(before, embed_context(bundle, params, cfg))) ++bad;
      }
    }
    r.passed = bad == 0;
    r.detail = std::to_string(cases - bad) + "/" + std::to_string(cases) + " context embeddings bitwise unchanged";
  });
}

CheckResult frozen_invariance(std::uint64_t seed, std::int64_t steps) {
  return timed("frozen-parameter invariance", [&](CheckResult& r) {
    Rng rng(seed);
    ModelConfig base_cfg;
    base_cfg.mode = ModelMode::base;
    auto base = init_params(base_cfg, rng.next_u64());
    jitter(base, rng, 0.02);
    ModelConfig cfg;
    cfg.mode = ModelMode::adapter;
    const auto start = derive_from_base(base, cfg);
    TrainConfig tc;
    tc.steps = steps;
    tc.seed = rng.next_u64();
    const auto data = generate({SampleTask::mv2v_inpaint, SampleTask::r2v_object}, 16, rng.next_u64());
    const auto res = fit(cfg, tc, start, data, {});
    int frozen = 0, changed_frozen = 0, changed_trainable = 0;
    for (const auto& [name, p] : start) {
      const bool same = bitwise_equal(p.value, res.state.params.at(name).value);
      if (p.trainable) {
        changed_trainable += !same;
      } else {
        ++frozen;
        changed_frozen += !same;
      }
    }
    r.passed = changed_frozen == 0 && changed_trainable > 0;
    r.detail = std::to_string(steps) + " steps: " + std::to_string(changed_frozen) + "/" + std::to_string(frozen) +
               " frozen tensors changed, " + std::to_string(changed_trainable) + " trainable tensors moved";
  });
}

CheckResult gradient_correctness(std::uint64_t seed) {
  auto r = timed("gradient correctness", [&](CheckResult& r) {
    double w32 = 0.0, w64 = 0.0;
    std::string n32, n64;
    for (auto mode : {ModelMode::fullft, ModelMode::adapter}) {
      const auto cfg = tiny_config(mode);
      Rng rng(seed);
      auto params = init_params(cfg, rng.next_u64());
      jitter(params, rng, 0.1);
      const auto bundle = random_bundle(rng, cfg, 2, 1, 2, 2);
      const auto noisy = normal<float>(rng, {2, 2, 2, cfg.codec.channels()});
      const auto in = make_input(cfg, noisy, bundle, {3, 7, cfg.pad_id(), cfg.pad_id()}, 0.37f);
      const auto target = patch_rows<float>(normal<float>(rng, {2, 2, 2, cfg.codec.channels()}), cfg);
      for (const auto& [name, e] : model_grad_errors(params, cfg, in, target, 1e-5)) {
        if (e.f32 > w32) w32 = e.f32, n32 = std::string(mode_name(mode)) + ":" + name;
        if (e.f64 > w64) w64 = e.f64, n64 = std::string(mode_name(mode)) + ":" + name;
      }
    }
    r.passed = w32 <= 1e-2 && w64 <= 1e-4;
    r.detail = "worst relative error 32-bit " + fmt(w32) + " (" + n32 + "), 64-bit " + fmt(w64) + " (" + n64 + ")";
  });
  r.passed = r.passed && r.seconds < 180.0;
  return r;
}

CheckResult sampler_contracts(std::uint64_t seed) {
  return timed("sampler contracts", [&](CheckResult& r) {
    Rng rng(seed);
    ModelConfig cfg;
    cfg.mode = ModelMode::adapter;
    auto params = init_params(cfg, rng.next_u64());
    jitter(params, rng, 0.05);
    const auto vcu = make_sample(SampleTask::mv2v_inpaint, rng.next_u64()).vcu;

    // Guide 1 against a hand-rolled conditional-only Euler loop.
    SampleConfig sc;
    sc.steps = 4;
    sc.guide = 1.0;
    sc.seed = rng.next_u64();
    const auto guided = euler_sample(params, cfg, vcu, sc);
    const auto bundle = encode_vcu(vcu, cfg.codec, cfg.decouple);
    auto x = seeded_noise_for(vcu, cfg, sc.seed);
    const auto ids = text_tokens(vcu.prompt, cfg);
    for (std::int64_t k = 0; k < sc.steps; ++k) {
      const double t0 = 1.0 - static_cast<double>(k) / static_cast<double>(sc.steps);
      const double t1 = 1.0 - static_cast<double>(k + 1) / static_cast<double>(sc.steps);
      const auto in = make_input(cfg, x, bundle, ids, static_cast<float>(t0));
      const auto v = unpatch_rows(forward(params, cfg, in), in.grid, cfg.codec.channels());
      const auto dt = static_cast<float>(t0 - t1);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dt * v[i];
    }
    auto conditional = decode_video(strip_refs(x, vcu.ref_count), cfg.codec);
    for (auto& v : conditional.data()) v = std::clamp(v, -1.0f, 1.0f);
    const bool g1 = bitwise_equal(guided, conditional);

    // One Euler step on a constant field; dyadic values keep eps - x0 exact.
    auto dyadic = [&](const Shape& s) {
      Tensor t(s);
      for (auto& v : t.data()) v = static_cast<float>(rng.uniform_int(-16, 16)) / 8.0f;
      return t;
    };
    const auto eps = dyadic({3, 2, 2, cfg.codec.channels()});
    const auto x0 = dyadic(eps.shape());
    Tensor field(eps.shape());
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = eps[i] - x0[i];
    const VelocityFn stub = [&](const LatentGrid&, float, const std::vector<std::int64_t>&) { return field; };
    SampleConfig one;
    one.steps = 1;
    const bool exact = bitwise_equal(euler_integrate(stub, eps, {}, {}, one), x0);

    // Output length over references and lengths.
    int wrong = 0, cases = 0;
    SampleConfig quick;
    quick.steps = 1;
    for (std::int64_t l = 0; l <= 3; ++l) {
      for (std::int64_t n = 2; n <= 8; n += 2, ++cases) {
        auto v = make_t2v("a red circle", n, 16, 16);
        if (l) v = with_references(v, uniform<float>(rng, {l, 16, 16, 3}, -1.0, 1.0));
        const auto out = euler_sample(params, cfg, v, quick);
        if (out.shape() != Shape{n, 16, 16, 3}) ++wrong;
      }
    }
    r.passed = g1 && exact && wrong == 0;
    r.detail = std::string("g=1 ") + (g1 ? "==" : "!=") + " conditional-only; one-step Euler " +
               (exact ? "exact" : "NOT exact") + "; output length n in " + std::to_string(cases - wrong) + "/" +
               std::to_string(cases) + " (l, n) cases";
  });
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  return {codec_roundtrip(seed),    vcu_algebra(),          decouple_partition(seed),   zero_init_identity(seed),
          mask_neutrality(seed),    frozen_invariance(seed), gradient_correctness(seed), sampler_contracts(seed)};
}

}  // namespace vace::checks
