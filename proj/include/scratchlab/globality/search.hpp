#pragma once

// Smallest token subset whose contents (plus, by default, the histogram of
// the input) carry at least `threshold` bits about the label.

#include <algorithm>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "scratchlab/globality/mi.hpp"

namespace scratchlab::globality {

enum class MiMode { exact, plugin };

inline const char* mode_name(MiMode m) { return m == MiMode::exact ? "exact" : "plugin"; }

struct SearchOptions {
  std::size_t k_max = 4;
  double threshold = 0.01;  // bits
  bool include_histogram = true;
  MiMode mode = MiMode::exact;
  std::size_t max_evaluations = 0;  // 0 = unlimited
  /// Greedy beam above k_max, up to this size (0 = off). Heuristic.
  std::size_t beam_k_max = 0;
  std::size_t beam_width = 8;
  std::size_t threads = 1;
};

struct SubsetResult {
  std::size_t k = 0;
  /// Ranking value: exact MI, or raw plug-in MI (both are monotone in S).
  double best_mi = 0.0;
  /// Value compared against the threshold: exact MI, or the Miller-Madow
  /// corrected plug-in MI of the witness.
  double score = 0.0;
  std::vector<std::size_t> witness;
  std::size_t evaluated = 0;
  bool complete = true;
  bool heuristic = false;
};

struct GlobalityReport {
  MiMode mode = MiMode::exact;
  std::size_t samples = 0;  // plug-in sample count, 0 in exact mode
  double threshold = 0.0;
  std::size_t k_max = 0;
  std::vector<SubsetResult> per_k;
  std::optional<std::size_t> verdict;  // smallest k reaching the threshold
  bool incomplete = false;             // budget ran out before a verdict
  bool constant_label = false;         // H(Y) = 0, verdict 0 without search

  std::string verdict_text() const {
    if (verdict) return std::to_string(*verdict);
    if (incomplete) return "incomplete";
    const std::size_t top = per_k.empty() ? k_max : per_k.back().k;
    return "> " + std::to_string(top);
  }
};

namespace detail {

// Next k-subset of {0..n-1} in lexicographic order; false after the last.
inline bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
  const std::size_t k = c.size();
  for (std::size_t i = k; i-- > 0;) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

struct Scored {
  double rank = 0.0;
  double score = 0.0;
};

inline Scored score_subset(const MiTable& t, const std::vector<std::size_t>& S, const SearchOptions& opt) {
  if (opt.mode == MiMode::exact) {
    const double v = t.mi(S, opt.include_histogram);
    return {v, v};
  }
  const auto e = plugin_from_counts(t.counts(S, opt.include_histogram));
  return {e.raw_bits, e.bits};
}

// Scores every candidate, concurrently when asked, in input order.
inline std::vector<Scored> score_all(const MiTable& t, const std::vector<std::vector<std::size_t>>& cands,
                                     const SearchOptions& opt) {
  std::vector<Scored> out(cands.size());
  const std::size_t nt = std::max<std::size_t>(1, std::min(opt.threads, cands.size()));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < cands.size(); i += nt) out[i] = score_subset(t, cands[i], opt);
  };
  if (nt == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nt; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace detail

/// Exhaustive search over k = 1..k_max, then an optional greedy beam.
/// Ties go to the lexicographically first subset.
inline GlobalityReport globality_search(const MiTable& table, const SearchOptions& opt) {
  if (!(opt.threshold > 0.0)) throw ShapeError("globality threshold must be positive");
  GlobalityReport rep;
  rep.mode = opt.mode;
  rep.threshold = opt.threshold;
  rep.k_max = opt.k_max;
  if (opt.mode == MiMode::plugin) rep.samples = static_cast<std::size_t>(table.joint().total());
  if (table.label_entropy() == 0.0) {
    rep.constant_label = true;
    rep.verdict = 0;
    return rep;
  }
  const std::size_t n = table.length();
  std::size_t budget_left = opt.max_evaluations ? opt.max_evaluations : SIZE_MAX;

  auto finish_k = [&](SubsetResult r) {
    const bool hit = r.score >= opt.threshold;
    rep.per_k.push_back(std::move(r));
    if (hit) {
      rep.verdict = rep.per_k.back().k;
      return true;
    }
    if (!rep.per_k.back().complete) {
      rep.incomplete = true;
      return true;
    }
    return false;
  };

  std::vector<std::vector<std::size_t>> beam;
  for (std::size_t k = 1; k <= std::min(opt.k_max, n); ++k) {
    std::vector<std::vector<std::size_t>> cands;
    std::vector<std::size_t> c(k);
    for (std::size_t i = 0; i < k; ++i) c[i] = i;
    bool complete = true;
    do {
      if (budget_left == 0) {
        complete = false;
        break;
      }
      cands.push_back(c);
      --budget_left;
    } while (detail::next_combination(c, n));
    const auto scores = detail::score_all(table, cands, opt);
    SubsetResult r;
    r.k = k;
    r.evaluated = cands.size();
    r.complete = complete;
    std::vector<std::size_t> order(cands.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a].rank > scores[b].rank; });
    if (!order.empty()) {
      r.best_mi = scores[order[0]].rank;
      r.score = scores[order[0]].score;
      r.witness = cands[order[0]];
    }
    beam.clear();
    for (std::size_t i = 0; i < std::min(opt.beam_width, order.size()); ++i) beam.push_back(cands[order[i]]);
    if (finish_k(std::move(r))) return rep;
  }

  // Greedy beam: extend each kept subset by one index.
  for (std::size_t k = opt.k_max + 1; k <= std::min(opt.beam_k_max, n); ++k) {
    std::vector<std::vector<std::size_t>> cands;
    bool complete = true;
    for (const auto& b : beam) {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(b.begin(), b.end(), i) != b.end()) continue;
        auto s = b;
        s.insert(std::upper_bound(s.begin(), s.end(), i), i);
        if (std::find(cands.begin(), cands.end(), s) != cands.end()) continue;
        if (budget_left == 0) {
          complete = false;
          break;
        }
        cands.push_back(std::move(s));
        --budget_left;
      }
    }
    std::sort(cands.begin(), cands.end());
    const auto scores = detail::score_all(table, cands, opt);
    std::vector<std::size_t> order(cands.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a].rank > scores[b].rank; });
    SubsetResult r;
    r.k = k;
    r.evaluated = cands.size();
    r.complete = complete;
    r.heuristic = true;
    if (!order.empty()) {
      r.best_mi = scores[order[0]].rank;
      r.score = scores[order[0]].score;
      r.witness = cands[order[0]];
    }
    beam.clear();
    for (std::size_t i = 0; i < std::min(opt.beam_width, order.size()); ++i) beam.push_back(cands[order[i]]);
    if (finish_k(std::move(r))) return rep;
  }
  return rep;
}

inline GlobalityReport globality_search(const DiscreteJoint& dist, const SearchOptions& opt) {
  return globality_search(MiTable(dist), opt);
}

/// Plug-in mode on n_samples fresh draws.
inline GlobalityReport globality_search(const Sampler& sampler, std::size_t n_samples, std::uint64_t seed,
                                        SearchOptions opt) {
  opt.mode = MiMode::plugin;
  return globality_search(MiTable(draw_samples(sampler, n_samples, seed)), opt);
}

/// An input with its step targets Y_1..Y_m.
struct StepOutcome {
  Tokens x;
  Tokens y;
  std::uint64_t weight = 1;
};

struct AutoregressiveReport {
  std::vector<GlobalityReport> steps;
  std::optional<std::size_t> overall;  // max over steps; empty if any step has no verdict
  bool incomplete = false;
};

/// Runs the subset search for each step t on (X, Y_<t) -> Y_t.
inline AutoregressiveReport autoregressive_globality(const std::vector<StepOutcome>& samples, const SearchOptions& opt) {
  if (samples.empty()) throw ShapeError("autoregressive globality needs samples");
  const std::size_t m = samples.front().y.size();
  for (const auto& s : samples) {
    if (s.y.size() != m) throw ShapeError("autoregressive samples are not step-aligned");
  }
  AutoregressiveReport out;
  std::size_t worst = 0;
  bool all = true;
  for (std::size_t t = 0; t < m; ++t) {
    DiscreteJoint d;
    d.support.reserve(samples.size());
    for (const auto& s : samples) {
      Tokens in = s.x;
      in.insert(in.end(), s.y.begin(), s.y.begin() + static_cast<std::ptrdiff_t>(t));
      d.support.push_back({std::move(in), s.y[t], s.weight});
    }
    out.steps.push_back(globality_search(d, opt));
    const auto& r = out.steps.back();
    if (r.incomplete) out.incomplete = true;
    if (r.verdict) {
      worst = std::max(worst, *r.verdict);
    } else {
      all = false;
    }
  }
  if (all) out.overall = worst;
  return out;
}

}  // namespace scratchlab::globality
