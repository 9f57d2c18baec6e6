// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "vace/ablate.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "vace/errors.hpp"

namespace vace {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Arm arm(std::string name, ModelConfig m, TrainConfig t) { return {std::move(name), std::move(m), std::move(t)}; }

}  // namespace

const char* axis_name(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::structure: return "structure";
    case AblationAxis::placement: return "placement";
    case AblationAxis::decouple: return "decouple";
    case AblationAxis::shift: return "shift";
    case AblationAxis::pzero: return "pzero";
  }
  return "unknown";
}

AblationAxis parse_axis(const std::string& name) {
  for (auto a : {AblationAxis::structure, AblationAxis::placement, AblationAxis::decouple, AblationAxis::shift,
                 AblationAxis::pzero}) {
    if (name == axis_name(a)) return a;
  }
  throw ArgumentError("unknown ablation axis '" + name + "'");
}

std::vector<Arm> ablation_arms(AblationAxis axis, const ModelConfig& model, const TrainConfig& train) {
  std::vector<Arm> out;
  switch (axis) {
    case AblationAxis::structure: {
      auto full = model;
      full.mode = ModelMode::fullft;
      auto adapter = model;
      adapter.mode = ModelMode::adapter;
      out.push_back(arm("fullft", full, train));
      out.push_back(arm("adapter", adapter, train));
      break;
    }
    case AblationAxis::placement: {
      const auto l = model.layers;
      std::vector<std::int64_t> ks;
      for (auto k : {l / 4, l / 2, l}) {
        if (k >= 1 && std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
      }
      for (auto k : ks) {
        for (auto spec : {PlacementSpec::continuous_first(k), PlacementSpec::distributed_even(k)}) {
          auto m = model;
          m.mode = ModelMode::adapter;
          m.placement = spec;
          out.push_back(arm(spec.str(), m, train));
        }
      }
      break;
    }
    case AblationAxis::decouple: {
      auto on = model, off = model;
      on.decouple = true;
      off.decouple = false;
      out.push_back(arm("decouple_on", on, train));
      out.push_back(arm("decouple_off", off, train));
      break;
    }
    case AblationAxis::shift:
      for (double s : {1.0, 3.0}) {
        auto t = train;
        t.shift = s;
        out.push_back(arm("shift=" + num(s), model, t));
      }
      break;
    case AblationAxis::pzero:
      for (double p : {0.0, 0.1, 0.3}) {
        auto t = train;
        t.p_zero = p;
        out.push_back(arm("p_zero=" + num(p), model, t));
      }
      break;
  }
  return out;
}

ParamStore pretrain_backbone(const ModelConfig& cfg, const BackboneRecipe& recipe, const Geometry& geo) {
  auto base = cfg;
  base.mode = ModelMode::base;
  const auto data = generate({SampleTask::t2v}, recipe.samples, recipe.seed, geo);
  TrainConfig tc;
  tc.steps = recipe.steps;
  tc.learning_rate = recipe.learning_rate;
  tc.seed = Rng::derive_seed(recipe.seed, 1);
  return fit(base, tc, init_params(base, Rng::derive_seed(recipe.seed, 2)), data, {}).state.params;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of an empty list");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double AblationReport::median_final(const std::string& name) const {
  std::vector<double> v;
  for (const auto& r : runs) {
    if (r.arm == name) v.push_back(r.final_loss());
  }
  return median(v);
}

AblationReport run_ablation(AblationAxis axis, const std::vector<std::uint64_t>& seeds, const ModelConfig& model,
                            const TrainConfig& train, const ParamStore& backbone,
                            const std::vector<TrainSample>& train_set, const std::vector<TrainSample>& val_set) {
  if (seeds.empty()) throw ArgumentError("ablate: at least one seed is required");
  AblationReport report;
  report.axis = axis;
  if (axis == AblationAxis::decouple) {
    report.note = "decouple_off routes every frame into the reactive stream x_c and sets x_k to zero";
  }
  const auto arms = ablation_arms(axis, model, train);
  std::map<std::uint64_t, std::string> first_digest;
  for (const auto& a : arms) {
    report.arms.push_back(a.name);
    for (auto seed : seeds) {
      auto tc = a.train;
      tc.seed = seed;
      auto fr = fit(a.model, tc, derive_from_base(backbone, a.model), train_set, val_set);
      ArmRun run;
      run.arm = a.name;
      run.seed = seed;
      run.curve = std::move(fr.evals);
      run.data_digest = fr.data_digest;
      for (std::size_t i = 0; i < fr.state.log.size();) {
        const auto step = fr.state.log[i].step;
        double sum = 0.0;
        std::size_t n = 0;
        for (; i < fr.state.log.size() && fr.state.log[i].step == step; ++i, ++n) sum += fr.state.log[i].loss;
        run.train_curve.push_back(sum / static_cast<double>(n));
      }
      auto [it, fresh] = first_digest.emplace(seed, run.data_digest);
      if (!fresh && it->second != run.data_digest) report.digests_match = false;
      report.runs.push_back(std::move(run));
    }
  }
  return report;
}

std::string AblationReport::tsv() const {
  std::ostringstream out;
  out << "arm\tseed\tstep\ttask\tloss\n";
  for (const auto& r : runs) {
    for (const auto& e : r.curve) {
      for (const auto& [task, loss] : e.per_task) {
        out << r.arm << "\t" << r.seed << "\t" << e.step << "\t" << task << "\t" << num(loss) << "\n";
      }
      out << r.arm << "\t" << r.seed << "\t" << e.step << "\tmean\t" << num(e.mean_loss) << "\n";
    }
  }
  for (const auto& a : arms) out << a << "\tmedian\t-\tmean\t" << num(median_final(a)) << "\n";
  return out.str();
}

std::string AblationReport::summary() const {
  std::ostringstream out;
  out << "ablation axis: " << axis_name(axis) << "\n";
  if (!note.empty()) out << "note: " << note << "\n";
  out << "data digests identical across arms: " << (digests_match ? "yes" : "NO") << "\n";
  for (const auto& a : arms) {
    out << a << ": median final validation loss " << num(median_final(a)) << " (per seed:";
    for (const auto& r : runs) {
      if (r.arm == a) out << " " << r.seed << "=" << num(r.final_loss());
    }
    out << ")\n";
  }
  return out.str();
}

}  // namespace vace
