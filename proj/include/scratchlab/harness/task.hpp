#pragma once

// Task registry for training and evaluation: which generator, which size
// distribution, which scratchpad, and how answers are read back.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scratchlab/errors.hpp"
#include "scratchlab/kv.hpp"
#include "scratchlab/model/transformer.hpp"
#include "scratchlab/scratchpad/builders.hpp"
#include "scratchlab/scratchpad/decode.hpp"
#include "scratchlab/scratchpad/encode.hpp"
#include "scratchlab/tasks/arith.hpp"
#include "scratchlab/tasks/graph.hpp"

namespace scratchlab::harness {

using scratchpad::AnswerRule;
using tasks::GraphInstance;
using tasks::Sample;
using tasks::Tokens;
using tasks::Vocabulary;

enum class TaskKind { cycle, mixed, ood_uneven, ood_i, random_graph, parity, half_parity, add_spaces, add_shift };

enum class ScratchMode { none, flat, inductive };

inline const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::cycle: return "cycle";
    case TaskKind::mixed: return "mixed";
    case TaskKind::ood_uneven: return "ood_uneven";
    case TaskKind::ood_i: return "ood_i";
    case TaskKind::random_graph: return "random_graph";
    case TaskKind::parity: return "parity";
    case TaskKind::half_parity: return "half_parity";
    case TaskKind::add_spaces: return "add_spaces";
    case TaskKind::add_shift: return "add_shift";
  }
  return "?";
}

inline TaskKind parse_task_kind(const std::string& s) {
  for (TaskKind k : {TaskKind::cycle, TaskKind::mixed, TaskKind::ood_uneven, TaskKind::ood_i, TaskKind::random_graph,
                     TaskKind::parity, TaskKind::half_parity, TaskKind::add_spaces, TaskKind::add_shift})
    if (s == task_kind_name(k)) return k;
  throw ConfigError("unknown task kind '" + s + "'");
}

inline const char* mode_name(ScratchMode m) {
  switch (m) {
    case ScratchMode::none: return "none";
    case ScratchMode::flat: return "flat";
    case ScratchMode::inductive: return "inductive";
  }
  return "?";
}

inline ScratchMode parse_mode(const std::string& s) {
  if (s == "none") return ScratchMode::none;
  if (s == "flat") return ScratchMode::flat;
  if (s == "inductive") return ScratchMode::inductive;
  throw ConfigError("unknown scratchpad mode '" + s + "' (none|flat|inductive)");
}

inline bool is_graph(TaskKind k) {
  return k == TaskKind::cycle || k == TaskKind::mixed || k == TaskKind::ood_uneven || k == TaskKind::ood_i ||
         k == TaskKind::random_graph;
}

inline bool is_addition(TaskKind k) { return k == TaskKind::add_spaces || k == TaskKind::add_shift; }

/// A task distribution. `n` is the size parameter of the kind:
///   cycle: cycle length n; mixed: largest size (uniform over 2..n);
///   ood_uneven: short cycle length; ood_i: i; random_graph: nodes = edges = n;
///   parity: most bits (uniform over n_min..n); half_parity: bit count;
///   add_*: most digits per operand (probability proportional to the digit
///   count over n_min..n, both operands the same length).
struct TaskSpec {
  TaskKind kind = TaskKind::cycle;
  int n = 2;
  int n_min = 1;
  int d_amb = 0;   // parity and addition window; 0 means n
  int total = 24;  // node count of the ood_* kinds
  ScratchMode mode = ScratchMode::none;

  int ambient() const { return d_amb > 0 ? d_amb : n; }

  void validate() const {
    if (n < 1) throw ConfigError("task.n must be positive");
    switch (kind) {
      case TaskKind::cycle:
      case TaskKind::mixed:
        if (n < 2) throw ConfigError("cycle tasks need n >= 2");
        break;
      case TaskKind::ood_uneven:
      case TaskKind::ood_i:
        if (n < 2 || 2 * n > total) throw ConfigError("ood tasks need 2 <= n <= total/2");
        break;
      case TaskKind::random_graph:
        if (mode != ScratchMode::none) throw ConfigError("random_graph has no scratchpad builder");
        // Positives sit at distance up to 4, which needs at least 5 nodes.
        if (n < 5) throw ConfigError("random_graph needs n >= 5");
        break;
      case TaskKind::parity:
      case TaskKind::add_spaces:
      case TaskKind::add_shift:
        if (n_min < 1 || n_min > n) throw ConfigError("task.n_min must be in [1, n]");
        if (ambient() < n) throw ConfigError("task.d_amb must be at least n");
        break;
      case TaskKind::half_parity:
        if (n < 2 || n % 2) throw ConfigError("half_parity needs an even n >= 2");
        break;
    }
  }

  void apply(const KeyValues& kv, const std::string& prefix = "task.") {
    if (auto it = kv.find(prefix + "kind"); it != kv.end()) kind = parse_task_kind(it->second);
    if (auto it = kv.find(prefix + "mode"); it != kv.end()) mode = parse_mode(it->second);
    get_kv(kv, prefix + "n", n);
    get_kv(kv, prefix + "n_min", n_min);
    get_kv(kv, prefix + "d_amb", d_amb);
    get_kv(kv, prefix + "total", total);
  }

  void store(KeyValues& kv, const std::string& prefix = "task.") const {
    kv[prefix + "kind"] = task_kind_name(kind);
    kv[prefix + "mode"] = mode_name(mode);
    kv[prefix + "n"] = std::to_string(n);
    kv[prefix + "n_min"] = std::to_string(n_min);
    kv[prefix + "d_amb"] = std::to_string(d_amb);
    kv[prefix + "total"] = std::to_string(total);
  }

  std::string describe() const {
    std::string s = std::string(task_kind_name(kind)) + " n=" + std::to_string(n);
    if (kind == TaskKind::parity || is_addition(kind)) {
      s += " n_min=" + std::to_string(n_min) + " d_amb=" + std::to_string(ambient());
    }
    return s + " mode=" + mode_name(mode);
  }
};

inline Vocabulary task_vocabulary(TaskKind k) { return is_graph(k) ? Vocabulary::graph() : Vocabulary::chars(); }

inline AnswerRule answer_rule(TaskKind k) {
  if (is_graph(k)) return AnswerRule::after_semicolon;
  if (k == TaskKind::parity) return AnswerRule::after_comma;
  if (k == TaskKind::half_parity) return AnswerRule::whole;
  return AnswerRule::left_of_dollar;
}

/// SplitMix64 finalizer, used to derive independent sample seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  return mix64(mix64(mix64(a) ^ b) ^ c);
}

struct Generated {
  Sample sample;
  std::optional<GraphInstance> graph;
};

namespace detail {

// Digit count with probability proportional to the count, over [lo, hi].
inline int draw_weighted_length(tasks::Rng& rng, int lo, int hi) {
  std::vector<double> w;
  for (int d = lo; d <= hi; ++d) w.push_back(static_cast<double>(d));
  return lo + static_cast<int>(std::discrete_distribution<int>(w.begin(), w.end())(rng));
}

}  // namespace detail

/// One sample of the task with states attached for flat and inductive modes.
inline Generated generate(const TaskSpec& spec, std::uint64_t seed) {
  tasks::Rng rng(seed);
  Generated out;
  const std::uint64_t gseed = rng();
  if (is_graph(spec.kind)) {
    GraphInstance g;
    switch (spec.kind) {
      case TaskKind::cycle: g = tasks::gen_cycle(spec.n, std::nullopt, gseed); break;
      case TaskKind::mixed: g = tasks::gen_mixed(spec.n, gseed); break;
      case TaskKind::ood_uneven: g = tasks::gen_ood_uneven(gseed, spec.total, spec.n); break;
      case TaskKind::ood_i: g = tasks::gen_ood_i(spec.n, gseed, spec.total); break;
      default: g = tasks::gen_random_graph(spec.n, spec.n, gseed); break;
    }
    out.sample = tasks::graph_sample(g, gseed);
    if (spec.mode == ScratchMode::flat) scratchpad::attach_dfs(out.sample, g);
    if (spec.mode == ScratchMode::inductive) scratchpad::attach_cycle_states(out.sample, g);
    out.graph = std::move(g);
    return out;
  }
  switch (spec.kind) {
    case TaskKind::parity: {
      const int bits = static_cast<int>(tasks::uniform_int(rng, spec.n_min, spec.n));
      out.sample = tasks::gen_parity(bits, spec.ambient(), gseed);
      if (spec.mode != ScratchMode::none) scratchpad::attach_parity_states(out.sample, spec.ambient());
      break;
    }
    case TaskKind::half_parity:
      out.sample = tasks::gen_half_parity(spec.n, gseed);
      if (spec.mode != ScratchMode::none) scratchpad::attach_half_parity_states(out.sample);
      break;
    default: {
      const int digits = detail::draw_weighted_length(rng, spec.n_min, spec.n);
      const bool shift = spec.kind == TaskKind::add_shift;
      out.sample = tasks::gen_addition(digits, digits, spec.ambient(),
                                       shift ? tasks::AdditionFormat::shift : tasks::AdditionFormat::spaces, gseed);
      if (spec.mode != ScratchMode::none) {
        if (shift) {
          scratchpad::attach_addition_shift(out.sample, spec.ambient(), rng);
        } else {
          scratchpad::attach_addition_spaces(out.sample, spec.ambient(), rng);
        }
      }
      break;
    }
  }
  return out;
}

/// Ground-truth model output after START: the answer (none), the states
/// joined by '#' (flat). Inductive targets live in the states.
inline Tokens target_tokens(const TaskSpec& spec, const Sample& s) {
  return spec.mode == ScratchMode::none ? s.answer : scratchpad::flat_scratchpad(s);
}

/// Whether the plain target is closed by EOS: always with a scratchpad,
/// and for the variable-length addition answers.
inline bool target_has_eos(const TaskSpec& spec) { return spec.mode != ScratchMode::none || is_addition(spec.kind); }

/// Training sequence for the spec's scratchpad mode. Loss falls on the
/// answer, scratchpad and EOS tokens, never on the question.
inline model::TrainSequence encode_for_training(const TaskSpec& spec, const Vocabulary& vocab, const Sample& s,
                                                std::size_t max_context) {
  scratchpad::EncodeOptions opt;
  opt.loss_on_question = false;
  opt.max_context = max_context;
  if (spec.mode == ScratchMode::inductive) {
    return scratchpad::train_sequence(scratchpad::encode_duplicated(vocab, s, opt));
  }
  return scratchpad::train_sequence(
      scratchpad::encode_plain(vocab, s, target_tokens(spec, s), target_has_eos(spec), opt));
}

/// Last '#'-separated state of a flat output.
inline Tokens last_state(const Tokens& out) {
  auto it = std::find(out.rbegin(), out.rend(), std::string(tasks::kStateSep));
  return Tokens(it.base(), out.end());
}

/// Answer read from a decoded output (none / flat) or final state (inductive).
inline Tokens read_answer(const TaskSpec& spec, const Tokens& output) {
  if (spec.mode == ScratchMode::none) return output;
  return scratchpad::extract_answer(answer_rule(spec.kind), last_state(output));
}

/// Oracle check of a generated sample: label / answer recomputed from the
/// input, and the answer extracted from the ground-truth scratchpad.
inline bool verify(const TaskSpec& spec, const Generated& g) {
  const Sample& s = g.sample;
  if (is_graph(spec.kind)) {
    if (!g.graph) return false;
    if (tasks::connectivity_oracle(*g.graph) != g.graph->label) return false;
    if (s.answer != Tokens{std::to_string(g.graph->label)}) return false;
  } else if (spec.kind == TaskKind::parity) {
    if (s.answer != Tokens{std::to_string(tasks::parity_oracle(s.question))}) return false;
  } else if (spec.kind == TaskKind::half_parity) {
    if (s.answer != Tokens{std::to_string(tasks::parity_oracle(s.question, spec.n / 2))}) return false;
  } else {
    if (tasks::render(s.answer) != tasks::addition_oracle(s.question)) return false;
  }
  if (spec.mode != ScratchMode::none) {
    if (s.states.empty()) return false;
    const Tokens truth = spec.mode == ScratchMode::flat ? scratchpad::flat_scratchpad(s) : s.states.back();
    if (read_answer(spec, truth) != s.answer) return false;
  }
  return true;
}

}  // namespace scratchlab::harness
