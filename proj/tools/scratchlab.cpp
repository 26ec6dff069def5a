// scratchlab command-line front end: data generation, training, evaluation,
// globality search, gradient checks and experiment presets.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scratchlab/globality/cycle.hpp"
#include "scratchlab/globality/search.hpp"
#include "scratchlab/harness/experiments.hpp"
#include "scratchlab/harness/train.hpp"
#include "scratchlab/model/checkpoint.hpp"

using namespace scratchlab;
using namespace scratchlab::harness;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--config", c.config, "flat key=value config file");
  app->add_option("--set", c.sets, "override one key (key=value), repeatable");
  app->add_option("--seed", c.seed, "random seed");
  if (with_out) app->add_option("--out", c.out, "output directory or file");
}

// Config file, then --set overrides, then --seed and --out.
KeyValues gather(const Common& c, const std::string& text_default = "") {
  KeyValues kv = c.config.empty() ? parse_kv(text_default) : read_kv_file(c.config);
  for (const auto& s : c.sets) {
    const auto one = parse_kv(s);
    if (one.size() != 1) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[one.begin()->first] = one.begin()->second;
  }
  if (c.seed) kv["train.seed"] = std::to_string(*c.seed);
  if (!c.out.empty()) kv["out"] = c.out;
  return kv;
}

std::string source_text(const Common& c, const KeyValues& kv) {
  if (c.config.empty() || !c.sets.empty() || c.seed || !c.out.empty()) return format_kv(kv);
  std::ifstream in(c.config, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json sample_json(const TaskSpec& spec, const Generated& g) {
  json j;
  const auto& s = g.sample;
  j["task"] = spec.describe();
  j["question"] = tasks::render(s.question);
  j["prelude"] = tasks::render(s.prelude);
  json states = json::array();
  for (const auto& st : s.states) states.push_back(tasks::render(st));
  j["states"] = states;
  j["target"] = tasks::render(target_tokens(spec, s));
  j["answer"] = tasks::render(s.answer);
  json meta = json::object();
  for (const auto& [k, v] : s.meta) meta[k] = v;
  j["meta"] = meta;
  return j;
}

int cmd_gen(const Common& c, std::size_t count) {
  const KeyValues kv = gather(c, "task.kind=cycle\ntask.n=3\n");
  TaskSpec spec;
  spec.apply(kv);
  spec.validate();
  std::uint64_t seed = 0;
  get_kv(kv, "train.seed", seed);
  std::ofstream file;
  if (!c.out.empty()) {
    file.open(c.out);
    if (!file) throw FormatError("cannot write " + c.out);
  }
  std::ostream& os = c.out.empty() ? std::cout : file;
  for (std::size_t i = 0; i < count; ++i) {
    const auto g = generate(spec, derive_seed(seed, name_hash("gen"), i));
    if (!verify(spec, g)) throw FormatError("generated sample fails its oracle");
    os << sample_json(spec, g).dump() << '\n';
  }
  return 0;
}

int cmd_train(const Common& c) {
  const KeyValues kv = gather(c);
  TrainConfig cfg = config_from_kv(kv);
  cfg.source_text = source_text(c, kv);
  const auto res = cfg.curriculum.schedule != Schedule::none ? curriculum_train(cfg) : train(cfg);
  std::printf("steps=%zu skipped=%zu", res.steps_run, res.skipped_steps);
  for (const auto& [name, acc] : res.final_accuracy) std::printf(" %s=%.4f", name.c_str(), acc);
  if (res.partial) std::printf(" partial");
  std::printf("\n");
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& records) {
  auto ck = model::load_checkpoint(checkpoint);
  KeyValues kv = ck.extra;  // the task the checkpoint was trained on
  kv["model.max_context"] = std::to_string(ck.config.max_context);
  for (const auto& [k, v] : gather(c)) kv[k] = v;
  TrainConfig cfg = config_from_kv(kv);
  const Vocabulary vocab = task_vocabulary(cfg.task.kind);
  if (vocab.size() != ck.config.vocab_size) throw ConfigError("checkpoint vocabulary does not match the task");
  std::ofstream rec;
  if (!records.empty()) {
    rec.open(records);
    if (!rec) throw FormatError("cannot write " + records);
  }
  const EvalOptions opt{cfg.eval_batch, env_threads()};
  for (const auto& e : cfg.evals) {
    const auto es = build_eval_set(e.name, e.task, e.size, cfg.seed);
    const auto r = evaluate(ck.params, ck.config, vocab, es, opt);
    std::printf("%s %s accuracy=%.4f (%zu/%zu)\n", e.name.c_str(), e.task.describe().c_str(), r.accuracy, r.correct,
                r.records.size());
    if (rec.is_open()) {
      for (const auto& x : r.records) {
        rec << json{{"eval", e.name},         {"index", x.index},       {"expected", x.expected},
                    {"predicted", x.predicted}, {"correct", x.correct}, {"finished", x.finished},
                    {"failure", x.failure}}
                   .dump()
            << '\n';
      }
    }
  }
  return 0;
}

int cmd_globality(const std::string& target, std::size_t n, std::size_t k, std::size_t k_max, const std::string& mode,
                  std::size_t samples, double threshold, std::uint64_t seed) {
  using namespace globality;
  SearchOptions opt;
  opt.k_max = k_max;
  opt.threshold = threshold;
  opt.threads = env_threads();
  if (mode == "plugin") {
    opt.mode = MiMode::plugin;
  } else if (mode != "exact") {
    throw ConfigError("--mode must be exact or plugin");
  }
  auto run = [&](const DiscreteJoint& d) {
    return opt.mode == MiMode::exact ? globality_search(d, opt) : globality_search(sampler_from(d), samples, seed, opt);
  };
  if (target == "cycle" || target == "parity") {
    DiscreteJoint d;
    if (target == "cycle") {
      d = canonical_cycle_joint(n);
    } else {
      std::vector<std::size_t> support;
      for (std::size_t i = 0; i < k; ++i) support.push_back(i);
      d = parity_joint(n, support);
    }
    const auto rep = run(d);
    std::fputs(globality_csv(rep).c_str(), stdout);
    std::fprintf(stderr, "verdict %s\n", rep.verdict_text().c_str());
    if (target == "cycle") std::fprintf(stderr, "analytic %.10g\n", cycle_analytic(n).approx);
    return 0;
  }
  if (target == "cycle-dfs" || target == "parity-cumulative") {
    if (opt.mode != MiMode::exact) throw ConfigError("scratchpad targets are searched in exact mode");
    const auto steps = target == "cycle-dfs" ? cycle_dfs_steps(n) : cumulative_parity_steps(n, k);
    const auto ar = autoregressive_globality(steps, opt);
    // CSV of the hardest step; per-step verdicts on stderr.
    std::size_t worst = 0;
    for (std::size_t t = 0; t < ar.steps.size(); ++t) {
      std::fprintf(stderr, "step %zu verdict %s\n", t + 1, ar.steps[t].verdict_text().c_str());
      const auto v = ar.steps[t].verdict.value_or(k_max + 1), w = ar.steps[worst].verdict.value_or(k_max + 1);
      if (v > w) worst = t;
    }
    std::fputs(globality_csv(ar.steps[worst]).c_str(), stdout);
    std::fprintf(stderr, "overall %s\n", ar.overall ? std::to_string(*ar.overall).c_str() : "none");
    return 0;
  }
  throw ConfigError("unknown globality target '" + target + "'");
}

int cmd_gradcheck(int trials, std::uint64_t seed) {
  const auto s = run_gradcheck_suite(trials, seed);
  std::fputs(gradcheck_csv(s).c_str(), stdout);
  return s.pass() ? 0 : 1;
}

int cmd_experiment(const Common& c, const std::string& name) {
  KeyValues overrides = c.config.empty() ? KeyValues{} : read_kv_file(c.config);
  for (const auto& s : c.sets) {
    const auto one = parse_kv(s);
    if (one.size() != 1) throw ConfigError("--set expects key=value, got '" + s + "'");
    overrides[one.begin()->first] = one.begin()->second;
  }
  if (c.seed) {
    overrides["train.seed"] = std::to_string(*c.seed);
    overrides["seed"] = std::to_string(*c.seed);
  }
  const std::string out = c.out.empty() ? "runs/" + name : c.out;
  const auto r = run_experiment(name, overrides, out);
  std::printf("%s\n", r.summary.c_str());
  return r.pass.value_or(true) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scratchlab: scratchpad and globality experiments on small transformers"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, exp_c;
  std::size_t count = 10;
  auto* gen = app.add_subcommand("gen", "write task samples as JSON lines");
  add_common(gen, gen_c);
  gen->add_option("--count", count, "number of samples");

  auto* tr = app.add_subcommand("train", "train a model from a config");
  add_common(tr, train_c);

  std::string checkpoint, records;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev, eval_c, false);
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("--out", records, "per-sample records (JSON lines)");

  std::string target = "cycle", mode = "exact";
  std::size_t n = 3, k = 3, k_max = 4, samples = 100000;
  double threshold = 0.01;
  std::uint64_t gseed = 0;
  auto* gl = app.add_subcommand("globality", "subset mutual-information search");
  gl->add_option("--target", target, "cycle | parity | cycle-dfs | parity-cumulative");
  gl->add_option("--n", n, "cycle length or bit count");
  gl->add_option("--k", k, "parity support size or scratchpad steps");
  gl->add_option("--k-max", k_max, "largest subset size searched");
  gl->add_option("--mode", mode, "exact | plugin");
  gl->add_option("--samples", samples, "plug-in sample count");
  gl->add_option("--threshold", threshold, "MI threshold in bits");
  gl->add_option("--seed", gseed, "plug-in sampling seed");

  int trials = 10;
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gc->add_option("--trials", trials, "random shape draws per primitive");
  gc->add_option("--seed", gc_seed, "seed");

  std::string preset;
  auto* ex = app.add_subcommand("experiment", "run a named preset");
  add_common(ex, exp_c);
  ex->add_option("name", preset, "preset name")->required();
  ex->footer([] {
    std::string s = "presets:";
    for (const auto& p : preset_names()) s += " " + p;
    return s;
  }());

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen(gen_c, count);
    if (*tr) return cmd_train(train_c);
    if (*ev) return cmd_eval(eval_c, checkpoint, records);
    if (*gl) return cmd_globality(target, n, k, k_max, mode, samples, threshold, gseed);
    if (*gc) return cmd_gradcheck(trials, gc_seed);
    if (*ex) return cmd_experiment(exp_c, preset);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
