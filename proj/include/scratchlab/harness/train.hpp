#pragma once

// Training loop, evaluation and the staged (curriculum) driver.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "scratchlab/harness/optimizer.hpp"
#include "scratchlab/harness/task.hpp"
#include "scratchlab/model/checkpoint.hpp"

namespace scratchlab::harness {

using model::ModelConfig;

/// Concurrency cap from SCRATCHLAB_THREADS (default 1).
inline std::size_t env_threads() {
  const char* v = std::getenv("SCRATCHLAB_THREADS");
  if (!v || !*v) return 1;
  const auto n = parse_number<std::size_t>("SCRATCHLAB_THREADS", v);
  return n == 0 ? 1 : n;
}

/// Keeps large activation buffers on the heap between steps instead of
/// returning them to the kernel after every free.
inline void tune_allocator() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)once;
#endif
}

enum class DataMode { fresh, fixed };
enum class Schedule { none, cumulative, forgetful };

inline const char* schedule_name(Schedule s) {
  return s == Schedule::cumulative ? "cumulative" : s == Schedule::forgetful ? "forgetful" : "none";
}

struct EvalSpec {
  std::string name;
  TaskSpec task;
  std::size_t size = 512;
};

struct CurriculumSpec {
  Schedule schedule = Schedule::none;
  double advance_threshold = 0.95;
  int n_max = 5;
  std::size_t stage_steps = 0;  // per-stage budget, 0 = train.steps
};

struct TrainConfig {
  TaskSpec task;
  ModelConfig model;
  AdamWConfig optim;
  std::size_t batch_size = 256;
  std::size_t grad_accum = 1;  // micro-batches per step
  std::size_t steps = 1000;
  std::size_t eval_interval = 100;
  std::size_t eval_batch = 128;
  std::size_t log_interval = 0;  // loss-only metric rows, 0 = off
  std::vector<EvalSpec> evals;
  std::uint64_t seed = 0;
  DataMode data = DataMode::fresh;
  std::size_t dataset_size = 10000;
  std::string stop_eval;      // early stop when this eval set reaches stop_accuracy
  double stop_accuracy = 0.0;  // 0 = never
  std::size_t nonfinite_limit = 10;
  bool wall_time = true;  // false writes wall_ms = 0 for byte-stable metrics
  bool save_checkpoint = true;
  CurriculumSpec curriculum;
  std::string out_dir;
  std::string source_text;  // config text as given, written verbatim

  void validate() const {
    task.validate();
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (steps < 1) throw ConfigError("train.steps must be >= 1");
    if (grad_accum < 1 || grad_accum > batch_size) throw ConfigError("train.grad_accum must be in [1, batch_size]");
    if (eval_interval < 1) throw ConfigError("train.eval_interval must be >= 1");
    if (eval_batch < 1) throw ConfigError("eval.batch must be >= 1");
    if (data == DataMode::fixed && dataset_size < 1) throw ConfigError("train.dataset_size must be >= 1");
    for (const auto& e : evals) {
      e.task.validate();
      if (e.size < 1) throw ConfigError("eval set " + e.name + " is empty");
      if (is_graph(e.task.kind) != is_graph(task.kind)) {
        throw ConfigError("eval set " + e.name + " uses a different vocabulary than the training task");
      }
    }
    if (curriculum.schedule != Schedule::none) {
      if (curriculum.n_max < 2) throw ConfigError("curriculum.n_max must be >= 2");
      if (!is_graph(task.kind)) throw ConfigError("curriculum schedules are defined for the cycle task");
    }
    model.validate();
  }
};

/// Parses a flat key=value config. Model vocab_size defaults to the task
/// vocabulary; model.max_context defaults to the longest probed encoding.
TrainConfig config_from_kv(const KeyValues& kv);
KeyValues config_to_kv(const TrainConfig& c);

// ------------------------------------------------------------ evaluation

struct EvalSet {
  std::string name;
  TaskSpec task;
  std::vector<Sample> samples;
  // Ground-truth extents, used to bound decoding.
  std::size_t max_prompt = 0;
  std::size_t max_target = 0;  // plain target tokens including EOS
  std::size_t max_states = 0;
  std::size_t max_state_len = 0;
};

struct EvalRecord {
  std::size_t index = 0;
  std::string expected;
  std::string predicted;
  bool correct = false;
  bool finished = false;
  std::string failure;
};

struct EvalResult {
  std::string name;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::vector<EvalRecord> records;
};

inline std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

/// Draws and oracle-checks `size` samples. Throws FormatError if any
/// sample disagrees with its oracle.
inline EvalSet build_eval_set(const std::string& name, const TaskSpec& spec, std::size_t size, std::uint64_t seed) {
  spec.validate();
  EvalSet es;
  es.name = name;
  es.task = spec;
  es.samples.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    auto g = generate(spec, derive_seed(seed, name_hash("eval:" + name), i));
    if (!verify(spec, g)) throw FormatError("eval set " + name + ": sample " + std::to_string(i) + " fails its oracle");
    const Sample& s = g.sample;
    es.max_prompt = std::max(es.max_prompt, s.question.size() + s.prelude.size() + 1);
    es.max_target = std::max(es.max_target, target_tokens(spec, s).size() + (target_has_eos(spec) ? 1 : 0));
    es.max_states = std::max(es.max_states, s.states.size());
    for (const auto& st : s.states) es.max_state_len = std::max(es.max_state_len, st.size());
    es.samples.push_back(std::move(g.sample));
  }
  return es;
}

struct EvalOptions {
  std::size_t batch = 128;
  std::size_t threads = 1;
};

namespace detail {

inline void evaluate_chunk(const model::ParameterStore<float>& params, const ModelConfig& cfg, const Vocabulary& vocab,
                           const EvalSet& es, std::size_t begin, std::size_t end, std::vector<EvalRecord>& out) {
  const TaskSpec& spec = es.task;
  std::span<const Sample> chunk(es.samples.data() + begin, end - begin);
  std::vector<Tokens> outputs(chunk.size());
  std::vector<char> finished(chunk.size(), 0);
  std::vector<std::string> failure(chunk.size());
  if (spec.mode == ScratchMode::inductive) {
    scratchpad::DecodeLimits lim;
    lim.max_states = 2 * es.max_states + 4;
    lim.max_state_len = 2 * es.max_state_len + 4;
    // Longest truncated context: permanent . prev . SEP . cur
    const std::size_t room = cfg.max_context > es.max_prompt + 1 ? cfg.max_context - es.max_prompt - 1 : 0;
    lim.max_state_len = std::max<std::size_t>(1, std::min(lim.max_state_len, room / 2));
    const auto res = scratchpad::inductive_decode(params, cfg, vocab, chunk, lim, scratchpad::DecodeMode::truncated);
    for (std::size_t i = 0; i < res.size(); ++i) {
      finished[i] = res[i].finished;
      failure[i] = res[i].failure;
      if (!res[i].states.empty()) outputs[i] = res[i].states.back();
    }
  } else {
    const bool eos = target_has_eos(spec);
    std::size_t max_new = spec.mode == ScratchMode::none ? es.max_target : 2 * es.max_target + 4;
    const std::size_t room = cfg.max_context >= es.max_prompt ? cfg.max_context - es.max_prompt + 1 : 1;
    max_new = std::max<std::size_t>(1, std::min(max_new, room));
    const auto res = scratchpad::plain_decode(params, cfg, vocab, chunk, max_new, eos);
    for (std::size_t i = 0; i < res.size(); ++i) {
      outputs[i] = res[i].output;
      finished[i] = res[i].finished;
      if (!res[i].finished) failure[i] = "no EOS within " + std::to_string(max_new) + " tokens";
    }
  }
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    EvalRecord r;
    r.index = begin + i;
    r.expected = tasks::render(chunk[i].answer);
    r.finished = finished[i];
    r.failure = failure[i];
    const Tokens ans = finished[i] ? read_answer(spec, outputs[i]) : Tokens{};
    r.predicted = tasks::render(ans);
    r.correct = finished[i] && ans == chunk[i].answer;
    out[begin + i] = std::move(r);
  }
}

}  // namespace detail

/// Greedy (none / flat) or inductive decoding of every sample, scored by
/// exact match of the extracted answer. Unfinished decodes count as wrong.
/// Parameters are only read.
inline EvalResult evaluate(const model::ParameterStore<float>& params, const ModelConfig& cfg, const Vocabulary& vocab,
                           const EvalSet& es, const EvalOptions& opt = {}) {
  EvalResult res;
  res.name = es.name;
  res.records.resize(es.samples.size());
  const std::size_t B = std::max<std::size_t>(1, opt.batch);
  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  for (std::size_t b = 0; b < es.samples.size(); b += B) chunks.push_back({b, std::min(es.samples.size(), b + B)});
  const std::size_t nt = std::max<std::size_t>(1, std::min(opt.threads, chunks.size()));
  auto work = [&](std::size_t w) {
    for (std::size_t c = w; c < chunks.size(); c += nt)
      detail::evaluate_chunk(params, cfg, vocab, es, chunks[c].first, chunks[c].second, res.records);
  };
  if (nt == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (std::size_t w = 0; w < nt; ++w)
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errs[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  for (const auto& r : res.records) res.correct += r.correct;
  res.accuracy = es.samples.empty() ? 0.0 : static_cast<double>(res.correct) / static_cast<double>(es.samples.size());
  return res;
}

/// Accuracy recomputed from per-sample records.
inline double accuracy_of(const std::vector<EvalRecord>& records) {
  if (records.empty()) return 0.0;
  std::size_t c = 0;
  for (const auto& r : records) c += r.correct;
  return static_cast<double>(c) / static_cast<double>(records.size());
}

// ------------------------------------------------------------- metrics

struct MetricsRow {
  std::size_t step = 0;
  double train_loss = 0.0;
  std::string eval_name;  // empty on loss-only rows
  double accuracy = 0.0;
  std::int64_t wall_ms = 0;
};

inline constexpr const char* kMetricsHeader = "step,train_loss,eval_name,accuracy,wall_ms";

inline std::string format_metrics_row(const MetricsRow& r) {
  char buf[64];
  std::string s = std::to_string(r.step) + ",";
  std::snprintf(buf, sizeof(buf), "%.6f", r.train_loss);
  s += buf;
  s += "," + r.eval_name + ",";
  if (!r.eval_name.empty()) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.accuracy);
    s += buf;
  }
  return s + "," + std::to_string(r.wall_ms);
}

/// Append-only CSV; every row is flushed.
class MetricsWriter {
 public:
  MetricsWriter() = default;
  explicit MetricsWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw FormatError("cannot open " + path);
    out_ << kMetricsHeader << '\n' << std::flush;
  }
  void write(const MetricsRow& r) {
    if (out_.is_open()) out_ << format_metrics_row(r) << '\n' << std::flush;
  }

 private:
  std::ofstream out_;
};

// ------------------------------------------------------------ training

struct StageRecord {
  std::string name;
  TaskSpec task;
  std::size_t start_step = 0;  // steps completed before the stage
  std::size_t end_step = 0;
  bool reached = false;  // the stage's accuracy target was met
};

struct TrainResult {
  std::vector<MetricsRow> rows;
  std::vector<double> losses;  // per completed step (NaN for skipped steps)
  std::vector<StageRecord> stages;
  std::size_t steps_run = 0;
  std::size_t skipped_steps = 0;
  bool stopped_early = false;  // a stop criterion ended training before the budget
  bool partial = false;        // a curriculum stage ran out of budget
  std::optional<std::size_t> reached_step;  // first eval step meeting the final stop criterion
  std::map<std::string, double> final_accuracy;
  model::ParameterStore<float> params;
  AdamWState optimizer;
  ModelConfig model;
};

/// One training stage: a task distribution, a step budget and an optional
/// accuracy target on a named eval set (which, when set, is built from the
/// stage task itself).
struct Stage {
  std::string name;
  TaskSpec task;
  std::size_t budget = 0;
  std::string target_eval;
  double target_accuracy = 0.0;  // 0 = run the whole budget
};

namespace detail {

inline std::size_t count_targets(const model::TrainSequence& s) {
  std::size_t c = 0;
  for (std::size_t t = 1; t < s.loss_mask.size(); ++t) c += s.loss_mask[t] != 0;
  return c;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + p.string());
  out << text;
}

}  // namespace detail

/// Runs stages back to back on one model and optimizer.
inline TrainResult run_stages(const TrainConfig& cfg, const std::vector<Stage>& stages) {
  cfg.validate();
  tune_allocator();
  const Vocabulary vocab = task_vocabulary(cfg.task.kind);
  if (cfg.model.vocab_size != vocab.size()) {
    throw ConfigError("model.vocab_size " + std::to_string(cfg.model.vocab_size) + " differs from the task vocabulary " +
                      std::to_string(vocab.size()));
  }
  TrainResult res;
  res.model = cfg.model;
  res.params = model::init_model<float>(cfg.model, derive_seed(cfg.seed, name_hash("init")));
  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&]() -> std::int64_t {
    if (!cfg.wall_time) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  };

  std::filesystem::path dir;
  MetricsWriter metrics;
  if (!cfg.out_dir.empty()) {
    dir = cfg.out_dir;
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "config.txt", cfg.source_text.empty() ? format_kv(config_to_kv(cfg)) : cfg.source_text);
    detail::write_text(dir / "resolved.txt", format_kv(config_to_kv(cfg)));
    metrics = MetricsWriter((dir / "metrics.csv").string());
  }

  std::vector<EvalSet> fixed_evals;
  for (const auto& e : cfg.evals) fixed_evals.push_back(build_eval_set(e.name, e.task, e.size, cfg.seed));
  const EvalOptions eopt{cfg.eval_batch, env_threads()};
  const std::size_t eval_size = cfg.evals.empty() ? 512 : cfg.evals.front().size;

  std::size_t step = 0, nonfinite = 0;
  double loss_acc = 0.0;
  std::size_t loss_n = 0;
  bool stop_all = false;

  for (std::size_t si = 0; si < stages.size() && !stop_all; ++si) {
    const Stage& st = stages[si];
    StageRecord rec{st.name, st.task, step, step, false};
    std::vector<EvalSet> evals = fixed_evals;
    if (!st.target_eval.empty() &&
        std::none_of(evals.begin(), evals.end(), [&](const EvalSet& e) { return e.name == st.target_eval; })) {
      evals.push_back(build_eval_set(st.target_eval, st.task, eval_size, cfg.seed));
    }
    std::vector<Sample> dataset;
    if (cfg.data == DataMode::fixed) {
      dataset.reserve(cfg.dataset_size);
      for (std::size_t i = 0; i < cfg.dataset_size; ++i)
        dataset.push_back(generate(st.task, derive_seed(cfg.seed, name_hash("data:" + st.name), i)).sample);
    }

    for (std::size_t local = 0; local < st.budget; ++local) {
      // ---- batch
      std::vector<model::TrainSequence> batch;
      batch.reserve(cfg.batch_size);
      tasks::Rng pick(derive_seed(cfg.seed, name_hash("pick"), step));
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const Sample s = cfg.data == DataMode::fresh
                             ? generate(st.task, derive_seed(cfg.seed, step, b)).sample
                             : dataset[static_cast<std::size_t>(tasks::uniform_int(pick, 0, dataset.size() - 1))];
        batch.push_back(encode_for_training(st.task, vocab, s, cfg.model.max_context));
      }
      std::size_t targets = 0;
      for (const auto& s : batch) targets += detail::count_targets(s);

      // ---- loss and gradients over micro-batches
      std::vector<Tensor<float>> grads;
      double loss_sum = 0.0;
      bool finite = true;
      const std::size_t M = cfg.grad_accum;
      try {
        for (std::size_t m = 0; m < M; ++m) {
          const std::size_t lo = batch.size() * m / M, hi = batch.size() * (m + 1) / M;
          std::span<const model::TrainSequence> part(batch.data() + lo, hi - lo);
          numerics::Tape<float> tape;
          auto P = model::bind(tape, res.params, true);
          auto loss = model::sequence_loss(tape, P, cfg.model, part, numerics::Reduction::sum, true,
                                           derive_seed(cfg.seed, step, m));
          tape.backward(loss);
          loss_sum += loss.value()[0];
          auto g = model::collect_grads(tape, P);
          const float inv = 1.0f / static_cast<float>(targets);
          for (auto& t : g)
            for (auto& v : t.data()) v = v * inv;
          if (grads.empty()) {
            grads = std::move(g);
          } else {
            for (std::size_t i = 0; i < grads.size(); ++i) {
              auto d = grads[i].data();
              const auto& s = g[i].data();
              for (std::size_t j = 0; j < d.size(); ++j) d[j] = d[j] + s[j];
            }
          }
        }
      } catch (const NumericError&) {
        finite = false;
      }
      const double loss = loss_sum / static_cast<double>(targets);
      if (finite && std::isfinite(loss)) finite = optimizer_step(res.params, std::move(grads), res.optimizer, cfg.optim);
      ++step;
      ++res.steps_run;
      rec.end_step = step;
      if (!finite || !std::isfinite(loss)) {
        ++res.skipped_steps;
        res.losses.push_back(std::nan(""));
        if (++nonfinite > cfg.nonfinite_limit) {
          throw NumericError("training aborted: more than " + std::to_string(cfg.nonfinite_limit) +
                             " consecutive non-finite steps at step " + std::to_string(step));
        }
      } else {
        nonfinite = 0;
        res.losses.push_back(loss);
        loss_acc += loss;
        ++loss_n;
      }

      const bool last = local + 1 == st.budget;
      if (cfg.log_interval && step % cfg.log_interval == 0 && step % cfg.eval_interval != 0) {
        MetricsRow r{step, res.losses.back(), "", 0.0, wall()};
        res.rows.push_back(r);
        metrics.write(r);
      }
      if (step % cfg.eval_interval != 0 && !last) continue;

      // ---- evaluation
      const double mean_loss = loss_n ? loss_acc / static_cast<double>(loss_n) : std::nan("");
      loss_acc = 0.0;
      loss_n = 0;
      bool target_met = false;
      for (const auto& es : evals) {
        const auto er = evaluate(res.params, cfg.model, vocab, es, eopt);
        MetricsRow r{step, mean_loss, es.name, er.accuracy, wall()};
        res.rows.push_back(r);
        metrics.write(r);
        res.final_accuracy[es.name] = er.accuracy;
        if (es.name == st.target_eval && st.target_accuracy > 0.0 && er.accuracy >= st.target_accuracy) {
          target_met = true;
        }
      }
      if (target_met) {
        rec.reached = true;
        if (si + 1 == stages.size()) {
          res.reached_step = step;
          res.stopped_early = !last;
          stop_all = true;
        }
        break;
      }
    }
    if (!rec.reached && st.target_accuracy > 0.0 && si + 1 < stages.size()) {
      res.partial = true;
      stop_all = true;
    }
    res.stages.push_back(rec);
  }

  if (!dir.empty()) {
    if (stages.size() > 1) {
      std::string csv = "stage,task,start_step,end_step,reached\n";
      for (const auto& s : res.stages) {
        csv += s.name + "," + s.task.describe() + "," + std::to_string(s.start_step) + "," +
               std::to_string(s.end_step) + "," + (s.reached ? "1" : "0") + "\n";
      }
      detail::write_text(dir / "stages.csv", csv);
    }
    if (cfg.save_checkpoint) {
      KeyValues extra;
      cfg.task.store(extra);
      extra["train.steps_run"] = std::to_string(res.steps_run);
      extra["train.seed"] = std::to_string(cfg.seed);
      model::save_checkpoint(res.params, cfg.model, (dir / "model.ckpt").string(), extra);
    }
  }
  return res;
}

/// Plain training: one stage on the configured task, optionally stopping
/// once `stop_eval` reaches `stop_accuracy`.
inline TrainResult train(const TrainConfig& cfg) {
  Stage st{"train", cfg.task, cfg.steps, cfg.stop_eval, cfg.stop_accuracy};
  return run_stages(cfg, {st});
}

/// Stage i (2..n_max) trains on D_i: the uniform mixture of sizes 2..i
/// (cumulative) or size i alone (forgetful), advancing once the "stage"
/// eval set drawn from D_i reaches the threshold. The last stage stops at
/// the threshold too; an exhausted stage budget ends the run as partial.
inline std::vector<Stage> curriculum_stages(const TrainConfig& cfg) {
  const auto& c = cfg.curriculum;
  if (c.schedule == Schedule::none) throw ConfigError("curriculum.schedule is none");
  if (c.n_max < 2) throw ConfigError("curriculum.n_max must be >= 2");
  std::vector<Stage> out;
  for (int i = 2; i <= c.n_max; ++i) {
    TaskSpec t = cfg.task;
    t.kind = c.schedule == Schedule::cumulative ? TaskKind::mixed : TaskKind::cycle;
    t.n = i;
    out.push_back({"D" + std::to_string(i), t, c.stage_steps ? c.stage_steps : cfg.steps, "stage", c.advance_threshold});
  }
  return out;
}

inline TrainResult curriculum_train(const TrainConfig& cfg) { return run_stages(cfg, curriculum_stages(cfg)); }

// ------------------------------------------------------ config parsing

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(std::string(trim(cur)));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!trim(cur).empty()) out.push_back(std::string(trim(cur)));
  return out;
}

// Longest training or evaluation encoding over a probe of samples.
inline std::size_t probe_context(const TaskSpec& spec, std::uint64_t seed, std::size_t probes) {
  const Vocabulary vocab = task_vocabulary(spec.kind);
  std::size_t longest = 0;
  for (std::size_t i = 0; i < probes; ++i) {
    const auto g = generate(spec, derive_seed(seed, name_hash("probe"), i));
    longest = std::max(longest, encode_for_training(spec, vocab, g.sample, 0).tokens.size());
  }
  return longest;
}

}  // namespace detail

inline TrainConfig config_from_kv(const KeyValues& kv) {
  TrainConfig c;
  c.task.apply(kv);
  c.optim.apply(kv);
  get_kv(kv, "train.batch_size", c.batch_size);
  get_kv(kv, "train.grad_accum", c.grad_accum);
  get_kv(kv, "train.steps", c.steps);
  get_kv(kv, "train.eval_interval", c.eval_interval);
  get_kv(kv, "train.log_interval", c.log_interval);
  get_kv(kv, "train.seed", c.seed);
  get_kv(kv, "seed", c.seed);
  if (auto it = kv.find("train.data"); it != kv.end()) {
    if (it->second == "fresh") {
      c.data = DataMode::fresh;
    } else if (it->second == "fixed") {
      c.data = DataMode::fixed;
    } else {
      throw ConfigError("train.data must be fresh or fixed");
    }
  }
  get_kv(kv, "train.dataset_size", c.dataset_size);
  get_kv(kv, "train.stop_eval", c.stop_eval);
  get_kv(kv, "train.stop_accuracy", c.stop_accuracy);
  get_kv(kv, "train.nonfinite_limit", c.nonfinite_limit);
  get_kv(kv, "train.wall_time", c.wall_time);
  get_kv(kv, "train.checkpoint", c.save_checkpoint);
  get_kv(kv, "out", c.out_dir);
  get_kv(kv, "eval.batch", c.eval_batch);
  std::size_t eval_size = 512;
  get_kv(kv, "eval.size", eval_size);
  std::vector<std::string> names{"test"};
  if (auto it = kv.find("eval.sets"); it != kv.end()) names = detail::split_list(it->second);
  for (const auto& name : names) {
    EvalSpec e{name, c.task, eval_size};
    e.task.apply(kv, "eval." + name + ".");
    get_kv(kv, "eval." + name + ".size", e.size);
    c.evals.push_back(e);
  }
  if (auto it = kv.find("curriculum.schedule"); it != kv.end()) {
    if (it->second == "cumulative") {
      c.curriculum.schedule = Schedule::cumulative;
    } else if (it->second == "forgetful") {
      c.curriculum.schedule = Schedule::forgetful;
    } else if (it->second == "none") {
      c.curriculum.schedule = Schedule::none;
    } else {
      throw ConfigError("curriculum.schedule must be none, cumulative or forgetful");
    }
  }
  get_kv(kv, "curriculum.threshold", c.curriculum.advance_threshold);
  get_kv(kv, "curriculum.n_max", c.curriculum.n_max);
  get_kv(kv, "curriculum.stage_steps", c.curriculum.stage_steps);

  c.model = ModelConfig::desk_default(task_vocabulary(c.task.kind).size());
  c.model.apply(kv);
  if (!kv.count("model.max_context")) {
    c.task.validate();
    std::size_t longest = detail::probe_context(c.task, c.seed, 200);
    for (const auto& e : c.evals) {
      e.task.validate();
      longest = std::max(longest, detail::probe_context(e.task, c.seed, 200));
    }
    if (c.curriculum.schedule != Schedule::none) {
      for (const auto& st : curriculum_stages(c)) longest = std::max(longest, detail::probe_context(st.task, c.seed, 50));
    }
    // Headroom for decodes that run past the ground truth length.
    c.model.max_context = (longest + longest / 4 + 16 + 15) / 16 * 16;
  }
  c.validate();
  return c;
}

inline KeyValues config_to_kv(const TrainConfig& c) {
  KeyValues kv;
  c.task.store(kv);
  c.model.store(kv);
  kv["optim.lr"] = std::to_string(c.optim.lr);
  kv["optim.beta1"] = std::to_string(c.optim.beta1);
  kv["optim.beta2"] = std::to_string(c.optim.beta2);
  kv["optim.eps"] = std::to_string(c.optim.eps);
  kv["optim.weight_decay"] = std::to_string(c.optim.weight_decay);
  kv["optim.warmup_steps"] = std::to_string(c.optim.warmup_steps);
  kv["optim.clip_norm"] = std::to_string(c.optim.clip_norm);
  kv["train.batch_size"] = std::to_string(c.batch_size);
  kv["train.grad_accum"] = std::to_string(c.grad_accum);
  kv["train.steps"] = std::to_string(c.steps);
  kv["train.eval_interval"] = std::to_string(c.eval_interval);
  kv["train.log_interval"] = std::to_string(c.log_interval);
  kv["train.seed"] = std::to_string(c.seed);
  kv["train.data"] = c.data == DataMode::fresh ? "fresh" : "fixed";
  kv["train.dataset_size"] = std::to_string(c.dataset_size);
  kv["train.stop_eval"] = c.stop_eval;
  kv["train.stop_accuracy"] = std::to_string(c.stop_accuracy);
  kv["train.nonfinite_limit"] = std::to_string(c.nonfinite_limit);
  kv["train.wall_time"] = c.wall_time ? "true" : "false";
  kv["train.checkpoint"] = c.save_checkpoint ? "true" : "false";
  kv["eval.batch"] = std::to_string(c.eval_batch);
  std::string names;
  for (const auto& e : c.evals) {
    names += (names.empty() ? "" : ",") + e.name;
    e.task.store(kv, "eval." + e.name + ".");
    kv["eval." + e.name + ".size"] = std::to_string(e.size);
  }
  kv["eval.sets"] = names;
  kv["curriculum.schedule"] = schedule_name(c.curriculum.schedule);
  kv["curriculum.threshold"] = std::to_string(c.curriculum.advance_threshold);
  kv["curriculum.n_max"] = std::to_string(c.curriculum.n_max);
  kv["curriculum.stage_steps"] = std::to_string(c.curriculum.stage_steps);
  return kv;
}

}  // namespace scratchlab::harness
