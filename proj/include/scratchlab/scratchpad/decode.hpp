#pragma once

// Greedy decoders: plain (flat / no scratchpad) and inductive.

#include <algorithm>
#include <string>
#include <vector>

#include "scratchlab/model/transformer.hpp"
#include "scratchlab/scratchpad/encode.hpp"
#include "scratchlab/tasks/tokens.hpp"

namespace scratchlab::scratchpad {

using model::DecodeState;

/// How an inductive decoder presents earlier states to the model.
enum class DecodeMode {
  masked,     // full history kept, earlier states hidden by group ids
  truncated,  // context rebuilt as P . s_i . SEP
};

struct DecodeLimits {
  std::size_t max_states = 64;
  std::size_t max_state_len = 64;
};

struct InductiveResult {
  std::vector<Tokens> states;  // generated states; the given state 0 of the shift format is excluded
  bool finished = false;       // EOS reached within the limits
  std::string failure;         // why decoding stopped early, empty when finished
};

struct PlainResult {
  Tokens output;  // emitted tokens without the EOS
  bool finished = false;
};

/// Model-side views of the encodings.
inline model::TrainSequence train_sequence(const InductiveEncoding& e) {
  return {e.tokens, e.positions, e.loss_mask, model::AttentionMask::from_groups(e.group)};
}

inline model::TrainSequence train_sequence(const Sequence& s) {
  std::vector<int> pos(s.tokens.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  return {s.tokens, std::move(pos), s.loss_mask, model::AttentionMask::causal(s.tokens.size())};
}

namespace detail {

struct InductiveRun {
  std::vector<int> permanent;
  std::vector<int> prev;  // previous state, empty before the first separator
  std::vector<int> cur;
  DecodeState ctx;        // masked mode only
  int group = 1;
  InductiveResult result;
  bool active = true;
};

inline void push_range(DecodeState& s, const std::vector<int>& toks, int& pos, int group) {
  for (int t : toks) s.push(t, pos++, group);
}

}  // namespace detail

/// Inductive greedy decoding for a batch of prompts. Each state s_{i+1} is
/// generated from a context equivalent to P . s_i . SEP with positions
/// restarting after P. A state longer than max_state_len, or more than
/// max_states states without EOS, ends that prompt as a decode failure.
template <class T>
std::vector<InductiveResult> inductive_decode(const model::ParameterStore<T>& params, const model::ModelConfig& cfg,
                                              const Vocabulary& vocab, std::span<const Sample> prompts,
                                              const DecodeLimits& limits = {},
                                              DecodeMode mode = DecodeMode::truncated) {
  const int sep = vocab.sep(), eos = vocab.eos();
  std::vector<detail::InductiveRun> runs(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    auto& r = runs[i];
    std::vector<int> q = vocab.encode(tasks::concat(prompts[i].question, prompts[i].prelude));
    if (has_no_start(prompts[i])) {
      r.prev = std::move(q);
    } else {
      r.permanent = std::move(q);
      r.permanent.push_back(vocab.start());
    }
    if (mode == DecodeMode::masked) {
      int pos = 0;
      detail::push_range(r.ctx, r.permanent, pos, 0);
      if (!r.prev.empty()) {
        detail::push_range(r.ctx, r.prev, pos, 1);
        r.ctx.push(sep, pos, 1);
      }
    }
  }

  std::vector<DecodeState> built;
  std::vector<const DecodeState*> batch;
  std::vector<std::size_t> who;
  while (true) {
    built.clear();
    batch.clear();
    who.clear();
    built.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
      auto& r = runs[i];
      if (!r.active) continue;
      who.push_back(i);
      if (mode == DecodeMode::masked) {
        batch.push_back(&r.ctx);
        continue;
      }
      DecodeState s;
      int pos = 0;
      detail::push_range(s, r.permanent, pos, 0);
      if (!r.prev.empty()) {
        detail::push_range(s, r.prev, pos, 1);
        s.push(sep, pos++, 1);
      }
      detail::push_range(s, r.cur, pos, 1);
      built.push_back(std::move(s));
    }
    if (who.empty()) break;
    if (mode == DecodeMode::truncated)
      for (const auto& s : built) batch.push_back(&s);
    for (const DecodeState* s : batch) {
      if (s->tokens.size() > cfg.max_context) throw ContextOverflow("inductive_decode: context exhausted");
    }
    const auto next = model::next_tokens(params, cfg, std::span<const DecodeState* const>(batch));

    for (std::size_t b = 0; b < who.size(); ++b) {
      auto& r = runs[who[b]];
      const int tok = next[b];
      if (tok == sep || tok == eos) {
        if (r.cur.empty()) {
          r.result.failure = "empty state";
          r.active = false;
          continue;
        }
        r.result.states.push_back(vocab.decode(r.cur));
        if (tok == eos) {
          r.result.finished = true;
          r.active = false;
          continue;
        }
        if (r.result.states.size() >= limits.max_states) {
          r.result.failure = "max_states reached without EOS";
          r.active = false;
          continue;
        }
        if (mode == DecodeMode::masked) {
          // The finished state moves into a fresh group with restarted
          // positions; everything it used to share a group with is hidden.
          const std::size_t len = r.cur.size() + 1;
          const int pos0 = static_cast<int>(r.permanent.size());
          ++r.group;
          r.ctx.push(tok, 0, 0);
          const std::size_t first = r.ctx.tokens.size() - len;
          for (std::size_t j = 0; j < len; ++j) {
            r.ctx.groups[first + j] = r.group;
            r.ctx.positions[first + j] = pos0 + static_cast<int>(j);
          }
        }
        r.prev = std::move(r.cur);
        r.cur.clear();
        continue;
      }
      r.cur.push_back(tok);
      if (mode == DecodeMode::masked) {
        r.ctx.push(tok, r.ctx.positions.back() + 1, r.group);
      }
      if (r.cur.size() > limits.max_state_len) {
        r.result.failure = "state longer than max_state_len";
        r.active = false;
      }
    }
  }
  std::vector<InductiveResult> out;
  out.reserve(runs.size());
  for (auto& r : runs) out.push_back(std::move(r.result));
  return out;
}

/// Greedy continuation of Q . prelude . START for each prompt, up to EOS or
/// max_new tokens. With stop_at_eos false exactly max_new tokens are taken.
template <class T>
std::vector<PlainResult> plain_decode(const model::ParameterStore<T>& params, const model::ModelConfig& cfg,
                                      const Vocabulary& vocab, std::span<const Sample> prompts, std::size_t max_new,
                                      bool stop_at_eos = true) {
  std::vector<DecodeState> states(prompts.size());
  std::vector<PlainResult> out(prompts.size());
  std::vector<char> active(prompts.size(), 1);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    int pos = 0;
    detail::push_range(states[i], vocab.encode(tasks::concat(prompts[i].question, prompts[i].prelude)), pos, 0);
    states[i].push(vocab.start(), pos, 0);
  }
  for (std::size_t step = 0; step < max_new; ++step) {
    std::vector<const DecodeState*> batch;
    std::vector<std::size_t> who;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (!active[i]) continue;
      if (states[i].tokens.size() > cfg.max_context) throw ContextOverflow("plain_decode: context exhausted");
      batch.push_back(&states[i]);
      who.push_back(i);
    }
    if (batch.empty()) break;
    const auto next = model::next_tokens(params, cfg, std::span<const DecodeState* const>(batch));
    for (std::size_t b = 0; b < who.size(); ++b) {
      const std::size_t i = who[b];
      if (stop_at_eos && next[b] == vocab.eos()) {
        out[i].finished = true;
        active[i] = 0;
        continue;
      }
      out[i].output.push_back(vocab.token(next[b]));
      model::extend_causal(states[i], next[b]);
    }
  }
  if (!stop_at_eos)
    for (auto& r : out) r.finished = true;
  return out;
}

}  // namespace scratchlab::scratchpad
