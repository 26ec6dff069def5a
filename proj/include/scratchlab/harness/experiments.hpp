#pragma once

// Named experiment presets. Each preset is a base config plus acceptance
// thresholds; overrides are applied on top of the base before parsing.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scratchlab/globality/cycle.hpp"
#include "scratchlab/globality/search.hpp"
#include "scratchlab/harness/gradcheck_suite.hpp"
#include "scratchlab/harness/train.hpp"

namespace scratchlab::harness {

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"cycle-nosp",    "cycle-dfs",      "cycle-inductive", "cycle-ood",
                                              "parity-half",   "parity-lengen",  "add-spaces",      "add-shift",
                                              "mixed",         "curriculum",     "globality-cycle", "gradcheck"};
  return names;
}

inline bool is_training_preset(const std::string& name) { return name != "globality-cycle" && name != "gradcheck"; }

/// Base config text of a training preset.
inline std::string preset_text(const std::string& name) {
  // Shared: desk model, 5k steps, evaluation every 100 steps.
  const std::string common =
      "train.steps=5000\n"
      "train.eval_interval=100\n"
      "eval.size=512\n";
  if (name == "cycle-nosp") {
    return common +
           "task.kind=cycle\ntask.n=2\ntask.mode=none\ntrain.batch_size=512\n"
           "train.stop_eval=test\ntrain.stop_accuracy=0.95\naccept.test.min=0.95\n";
  }
  if (name == "cycle-dfs" || name == "cycle-inductive") {
    return common + "task.kind=cycle\ntask.n=5\ntask.mode=" + (name == "cycle-dfs" ? "flat" : "inductive") +
           "\ntrain.batch_size=512\neval.size=256\ntrain.stop_eval=test\ntrain.stop_accuracy=0.95\n"
           "accept.test.min=0.95\n";
  }
  if (name == "cycle-ood") {
    // Uneven 6/18 training distribution, out-of-distribution test on two
    // 12-cycles versus one 24-cycle.
    return common +
           "task.kind=ood_uneven\ntask.n=6\ntask.total=24\ntask.mode=inductive\ntrain.batch_size=256\n"
           "eval.size=256\neval.sets=train,ood\neval.ood.kind=cycle\neval.ood.n=12\n"
           "train.stop_eval=train\ntrain.stop_accuracy=0.99\n";
  }
  if (name == "parity-half") {
    return common + "task.kind=half_parity\ntask.n=20\ntask.mode=inductive\neval.size=256\n";
  }
  if (name == "parity-lengen") {
    return common +
           "task.kind=parity\ntask.n=12\ntask.n_min=1\ntask.d_amb=24\ntask.mode=inductive\n"
           "eval.size=256\neval.sets=train,len16\neval.len16.n=16\neval.len16.n_min=16\n"
           "accept.len16.min=0.8\n";
  }
  if (name == "add-spaces") {
    return common +
           "task.kind=add_spaces\ntask.n=4\ntask.mode=inductive\n"
           "eval.size=256\neval.sets=train,len6\neval.len6.n=6\neval.len6.n_min=6\n";
  }
  if (name == "add-shift") {
    return common +
           "task.kind=add_shift\ntask.n=3\ntask.d_amb=12\ntask.mode=inductive\n"
           "eval.size=256\neval.sets=train,len6\neval.len6.n=6\neval.len6.n_min=6\n"
           "accept.len6.min=0.8\n";
  }
  if (name == "mixed") {
    return common +
           "task.kind=mixed\ntask.n=5\ntask.mode=none\ntrain.batch_size=512\n"
           "eval.sets=n2,n5\neval.n2.kind=cycle\neval.n2.n=2\neval.n5.kind=cycle\neval.n5.n=5\n";
  }
  if (name == "curriculum") {
    return common +
           "task.kind=cycle\ntask.n=2\ntask.mode=none\ntrain.batch_size=512\n"
           "curriculum.schedule=cumulative\ncurriculum.n_max=5\ncurriculum.threshold=0.95\n"
           "curriculum.stage_steps=5000\neval.sets=size2\neval.size2.n=2\n";
  }
  throw ConfigError("unknown experiment preset '" + name + "'");
}

/// Acceptance bounds on final eval accuracies, from accept.<eval>.min/max.
struct Threshold {
  std::string eval;
  std::optional<double> min, max;
};

inline std::vector<Threshold> thresholds_from(const KeyValues& kv) {
  std::map<std::string, Threshold> by;
  for (const auto& [k, v] : kv) {
    if (k.rfind("accept.", 0) != 0) continue;
    const auto rest = k.substr(7);
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos) throw ConfigError("malformed acceptance key " + k);
    const auto eval = rest.substr(0, dot), bound = rest.substr(dot + 1);
    auto& t = by[eval];
    t.eval = eval;
    const double x = parse_number<double>(k, v);
    if (bound == "min") {
      t.min = x;
    } else if (bound == "max") {
      t.max = x;
    } else {
      throw ConfigError("acceptance bound must be min or max: " + k);
    }
  }
  std::vector<Threshold> out;
  for (auto& [_, t] : by) out.push_back(t);
  return out;
}

/// Thresholds that depend on the resolved task rather than the preset name.
inline void mode_thresholds(const std::string& name, const TrainConfig& cfg, KeyValues& kv) {
  auto set = [&](const std::string& k, const std::string& v) { kv.emplace(k, v); };  // explicit keys win
  if (name == "cycle-ood") {
    if (cfg.task.mode == ScratchMode::inductive) {
      set("accept.ood.min", "0.85");
    } else {
      set("accept.train.min", "0.95");
      set("accept.ood.max", "0.6");
    }
  } else if (name == "parity-half") {
    if (cfg.task.mode == ScratchMode::none) {
      set("accept.test.min", "0.45");
      set("accept.test.max", "0.55");
    } else {
      set("accept.test.min", "0.99");
    }
  }
}

struct ExperimentResult {
  std::string name;
  std::optional<bool> pass;  // empty when the preset defines no threshold
  std::string summary;       // one line
  std::map<std::string, double> values;
  std::optional<TrainResult> train;
};

inline std::string pass_text(const std::optional<bool>& p) { return !p ? "n/a" : *p ? "PASS" : "FAIL"; }

inline std::string fmt_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

/// CSV rows of a globality report: k,best_mi_bits,witness,mode,samples.
inline std::string globality_csv(const globality::GlobalityReport& r) {
  std::string s = "k,best_mi_bits,witness,mode,samples\n";
  for (const auto& k : r.per_k) {
    std::string w;
    for (std::size_t i = 0; i < k.witness.size(); ++i) w += (i ? " " : "") + std::to_string(k.witness[i]);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", k.best_mi);
    s += std::to_string(k.k) + "," + buf + "," + w + "," + globality::mode_name(r.mode) + "," +
         std::to_string(r.samples) + "\n";
  }
  return s;
}

/// Gradient-check table: name,trial,max_rel_error,tolerance,coords,pass.
inline std::string gradcheck_csv(const GradCheckSuite& s) {
  std::string out = "name,trial,max_rel_error,tolerance,coords,pass\n";
  for (const auto& e : s.entries) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e,%.0e", e.max_rel_error, e.tolerance);
    out += e.name + "," + std::to_string(e.trial) + "," + buf + "," + std::to_string(e.coords) + "," +
           (e.pass() ? "1" : "0") + "\n";
  }
  return out;
}

/// Resolved config of a training preset with overrides applied.
inline KeyValues preset_kv(const std::string& name, const KeyValues& overrides) {
  KeyValues kv = parse_kv(preset_text(name));
  for (const auto& [k, v] : overrides) kv[k] = v;
  return kv;
}

/// Runs a preset. Artifacts go to `out_dir` when it is non-empty: the
/// config snapshot, metrics.csv and model.ckpt for training presets, a CSV
/// table for the others, and summary.txt for all.
inline ExperimentResult run_experiment(const std::string& name, const KeyValues& overrides, const std::string& out_dir) {
  if (std::find(preset_names().begin(), preset_names().end(), name) == preset_names().end()) {
    throw ConfigError("unknown experiment preset '" + name + "'");
  }
  ExperimentResult res;
  res.name = name;
  std::filesystem::path dir(out_dir);
  if (!out_dir.empty()) std::filesystem::create_directories(dir);
  auto emit = [&](const std::string& file, const std::string& text) {
    if (!out_dir.empty()) detail::write_text(dir / file, text);
  };

  if (name == "gradcheck") {
    int trials = 10;
    std::uint64_t seed = 0;
    get_kv(overrides, "gradcheck.trials", trials);
    get_kv(overrides, "seed", seed);
    const auto suite = run_gradcheck_suite(trials, seed);
    double worst_prim = 0.0, worst_model = 0.0;
    for (const auto& e : suite.entries) {
      double& worst = e.name.rfind("model_", 0) == 0 ? worst_model : worst_prim;
      worst = std::max(worst, e.max_rel_error);
    }
    res.pass = suite.pass();
    res.values = {{"primitive_max_rel_error", worst_prim}, {"model_max_rel_error", worst_model}};
    char buf[160];
    std::snprintf(buf, sizeof(buf), "checks=%zu primitive_max_rel=%.2e model_max_rel=%.2e", suite.entries.size(),
                  worst_prim, worst_model);
    res.summary = "gradcheck " + pass_text(res.pass) + " " + buf;
    emit("gradcheck.csv", gradcheck_csv(suite));
  } else if (name == "globality-cycle") {
    std::size_t n = 3;
    get_kv(overrides, "globality.n", n);
    globality::SearchOptions opt;
    opt.k_max = n;
    get_kv(overrides, "globality.k_max", opt.k_max);
    get_kv(overrides, "globality.threshold", opt.threshold);
    opt.threads = env_threads();
    const auto rep = globality::globality_search(globality::canonical_cycle_joint(n), opt);
    const auto an = globality::cycle_analytic(n);
    res.pass = rep.verdict == std::optional<std::size_t>(n);
    res.values["analytic"] = an.approx;
    for (const auto& k : rep.per_k) res.values["mi_k" + std::to_string(k.k)] = k.best_mi;
    res.summary = "globality-cycle " + pass_text(res.pass) + " n=" + std::to_string(n) + " verdict=" +
                  rep.verdict_text() + " analytic=" + fmt_value(an.approx);
    emit("globality.csv", globality_csv(rep));
  } else {
    KeyValues kv = preset_kv(name, overrides);
    if (!out_dir.empty()) kv["out"] = out_dir;
    TrainConfig cfg = config_from_kv(kv);
    mode_thresholds(name, cfg, kv);
    cfg.source_text = format_kv(kv);
    const auto thresholds = thresholds_from(kv);
    TrainResult tr = cfg.curriculum.schedule != Schedule::none ? curriculum_train(cfg) : train(cfg);
    std::string line = name + " ";
    std::string detail_text = " steps=" + std::to_string(tr.steps_run);
    for (const auto& [e, acc] : tr.final_accuracy) {
      res.values[e] = acc;
      detail_text += " " + e + "=" + fmt_value(acc);
    }
    if (!tr.losses.empty()) {
      res.values["first_loss"] = tr.losses.front();
      res.values["last_loss"] = tr.losses.back();
    }
    if (tr.reached_step) {
      res.values["reached_step"] = static_cast<double>(*tr.reached_step);
      detail_text += " reached_step=" + std::to_string(*tr.reached_step);
    }
    std::optional<bool> pass;
    for (const auto& t : thresholds) {
      const auto it = tr.final_accuracy.find(t.eval);
      if (it == tr.final_accuracy.end()) throw ConfigError("acceptance refers to unknown eval set " + t.eval);
      bool ok = true;
      if (t.min) ok = ok && it->second >= *t.min;
      if (t.max) ok = ok && it->second <= *t.max;
      pass = pass.value_or(true) && ok;
    }
    if (cfg.curriculum.schedule != Schedule::none) {
      const bool done = !tr.partial && tr.stages.size() == static_cast<std::size_t>(cfg.curriculum.n_max - 1) &&
                        tr.stages.back().reached;
      pass = pass.value_or(true) && done;
      detail_text += " stages=" + std::to_string(tr.stages.size()) + (tr.partial ? " partial" : "");
    }
    res.pass = pass;
    res.summary = line + pass_text(pass) + detail_text;
    res.train = std::move(tr);
  }
  emit("summary.txt", res.summary + "\n");
  return res;
}

}  // namespace scratchlab::harness
