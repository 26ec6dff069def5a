#pragma once

// Pre-norm GPT-2 style decoder. A batch is the row-wise concatenation of its
// sequences (no padding); attention never crosses sequence boundaries.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scratchlab/errors.hpp"
#include "scratchlab/model/config.hpp"
#include "scratchlab/model/parameters.hpp"
#include "scratchlab/numerics/ops.hpp"
#include "scratchlab/numerics/visibility.hpp"

namespace scratchlab::model {

using AttentionMask = numerics::Visibility;

/// One sequence of a batch. `visible` must outlive the forward call.
struct SequenceView {
  std::span<const int> tokens;
  std::span<const int> positions;
  const AttentionMask* visible = nullptr;
};

namespace detail {

inline void validate_sequence(const SequenceView& s, const ModelConfig& cfg) {
  const std::size_t T = s.tokens.size();
  if (T == 0) throw ShapeError("empty sequence");
  if (T > cfg.max_context) {
    throw ContextOverflow("sequence of " + std::to_string(T) + " tokens exceeds context " +
                          std::to_string(cfg.max_context));
  }
  if (s.positions.size() != T) throw ShapeError("positions length differs from tokens length");
  if (!s.visible || s.visible->size() != T) throw ShapeError("attention mask size differs from sequence length");
  for (int p : s.positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= cfg.max_context) {
      throw ShapeError("position index " + std::to_string(p) + " out of range");
    }
  }
  for (int t : s.tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
      throw ShapeError("token id " + std::to_string(t) + " out of range");
    }
  }
  s.visible->validate_causal();
}

}  // namespace detail

/// Runs the stack over a packed batch and returns logits [rows.size() x V]
/// for the requested global row indices (all rows when `rows` is empty).
/// Dropout is active only when cfg.dropout > 0 and `train` is set.
template <class T>
Var<T> forward_rows(Tape<T>& tape, const BoundParams<T>& P, const ModelConfig& cfg,
                    std::span<const SequenceView> batch, std::span<const std::size_t> rows,
                    bool train = false, std::uint64_t dropout_seed = 0) {
  using namespace numerics;
  if (batch.empty()) throw ShapeError("forward: empty batch");
  if (P.vars.empty() || P.vars.front().tape != &tape) throw ShapeError("forward: parameters bound to another tape");
  std::vector<int> tokens, positions;
  std::vector<Segment> segments;
  for (const auto& s : batch) {
    detail::validate_sequence(s, cfg);
    segments.push_back(Segment{tokens.size(), s.tokens.size(), s.visible});
    tokens.insert(tokens.end(), s.tokens.begin(), s.tokens.end());
    positions.insert(positions.end(), s.positions.begin(), s.positions.end());
  }
  const T eps = static_cast<T>(1e-5);
  const bool drop = train && cfg.dropout > 0.0;
  std::uint64_t drop_calls = 0;
  auto maybe_drop = [&](Var<T> v) {
    return drop ? dropout(v, cfg.dropout, dropout_seed * 0x9E3779B97F4A7C15ull + ++drop_calls) : v;
  };

  Var<T> x = add(embedding(P("wte"), std::span<const int>(tokens)),
                 embedding(P("wpe"), std::span<const int>(positions)));
  x = maybe_drop(x);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    auto W = [&](const char* s) { return P(layer_name(l, s)); };
    Var<T> h = layernorm(x, W("ln_1.weight"), W("ln_1.bias"), eps);
    Var<T> q = add_bias(matmul(h, W("attn.q.weight")), W("attn.q.bias"));
    Var<T> k = add_bias(matmul(h, W("attn.k.weight")), W("attn.k.bias"));
    Var<T> v = add_bias(matmul(h, W("attn.v.weight")), W("attn.v.bias"));
    Var<T> a = attention(q, k, v, std::span<const Segment>(segments), cfg.n_heads);
    Var<T> o = add_bias(matmul(a, W("attn.proj.weight")), W("attn.proj.bias"));
    x = add(x, maybe_drop(o));
    Var<T> h2 = layernorm(x, W("ln_2.weight"), W("ln_2.bias"), eps);
    Var<T> m = gelu(add_bias(matmul(h2, W("mlp.fc.weight")), W("mlp.fc.bias")));
    m = add_bias(matmul(m, W("mlp.proj.weight")), W("mlp.proj.bias"));
    x = add(x, maybe_drop(m));
  }
  if (!rows.empty()) x = gather_rows(x, rows);
  x = layernorm(x, P("ln_f.weight"), P("ln_f.bias"), eps);
  Var<T> head = cfg.tie_output_head ? transpose(P("wte")) : P("lm_head.weight");
  return matmul(x, head);
}

/// Full-sequence logits [T x V] for a single sequence, no gradient.
template <class T>
Tensor<T> forward(const ParameterStore<T>& params, const ModelConfig& cfg, std::span<const int> tokens,
                  std::span<const int> positions, const AttentionMask& mask) {
  Tape<T> tape;
  auto P = bind(tape, params, false);
  SequenceView s{tokens, positions, &mask};
  return forward_rows(tape, P, cfg, std::span<const SequenceView>(&s, 1), {}).value();
}

/// Next-token training example in packed form: token t is a target iff
/// loss_mask[t] is set, and it is predicted from row t-1.
struct TrainSequence {
  std::vector<int> tokens;
  std::vector<int> positions;
  std::vector<std::uint8_t> loss_mask;
  AttentionMask visible;
};

/// Masked cross-entropy over a packed batch of training sequences.
template <class T>
Var<T> sequence_loss(Tape<T>& tape, const BoundParams<T>& P, const ModelConfig& cfg,
                     std::span<const TrainSequence> batch, numerics::Reduction reduction,
                     bool train = false, std::uint64_t dropout_seed = 0) {
  std::vector<SequenceView> views;
  std::vector<std::size_t> rows;
  std::vector<int> targets;
  std::size_t offset = 0;
  for (const auto& s : batch) {
    if (s.loss_mask.size() != s.tokens.size()) throw ShapeError("loss mask length differs from tokens");
    views.push_back(SequenceView{s.tokens, s.positions, &s.visible});
    for (std::size_t t = 1; t < s.tokens.size(); ++t) {
      if (!s.loss_mask[t]) continue;
      rows.push_back(offset + t - 1);
      targets.push_back(s.tokens[t]);
    }
    offset += s.tokens.size();
  }
  if (rows.empty()) throw ShapeError("batch has no loss-bearing position");
  Var<T> logits = forward_rows(tape, P, cfg, std::span<const SequenceView>(views),
                               std::span<const std::size_t>(rows), train, dropout_seed);
  std::vector<std::uint8_t> ones(rows.size(), 1);
  return numerics::cross_entropy(logits, std::span<const int>(targets), std::span<const std::uint8_t>(ones),
                                 reduction);
}

/// Gradient of every bound parameter after backward; zeros where no
/// gradient reached a parameter.
template <class T>
std::vector<Tensor<T>> collect_grads(const Tape<T>& tape, const BoundParams<T>& P) {
  std::vector<Tensor<T>> out;
  out.reserve(P.vars.size());
  for (std::size_t i = 0; i < P.vars.size(); ++i) {
    const Tensor<T>* g = tape.grad(P.vars[i].id);
    out.push_back(g ? *g : Tensor<T>::zeros((*P.store)[i].shape()));
  }
  return out;
}

/// Growing decode context. Groups drive the attention mask exactly as in
/// AttentionMask::from_groups, so all-zero groups give a causal mask.
struct DecodeState {
  std::vector<int> tokens;
  std::vector<int> positions;
  std::vector<int> groups;

  void push(int token, int position, int group) {
    tokens.push_back(token);
    positions.push_back(position);
    groups.push_back(group);
  }
};

/// Decides the position and group of a token just appended by the decoder.
using ExtendPolicy = std::function<void(DecodeState&, int token)>;

/// Default policy: next position, same group as the previous token.
inline void extend_causal(DecodeState& s, int token) {
  const int pos = s.positions.empty() ? 0 : s.positions.back() + 1;
  const int grp = s.groups.empty() ? 0 : s.groups.back();
  s.push(token, pos, grp);
}

/// Argmax of the last row of each state's context, evaluated as one packed batch.
template <class T>
std::vector<int> next_tokens(const ParameterStore<T>& params, const ModelConfig& cfg,
                             std::span<const DecodeState* const> states) {
  std::vector<AttentionMask> masks;
  masks.reserve(states.size());
  std::vector<SequenceView> views;
  std::vector<std::size_t> rows;
  std::size_t offset = 0;
  for (const DecodeState* s : states) {
    masks.push_back(AttentionMask::from_groups(s->groups));
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    const DecodeState* s = states[i];
    views.push_back(SequenceView{s->tokens, s->positions, &masks[i]});
    offset += s->tokens.size();
    rows.push_back(offset - 1);
  }
  Tape<T> tape;
  auto P = bind(tape, params, false);
  Tensor<T> logits = forward_rows(tape, P, cfg, std::span<const SequenceView>(views),
                                  std::span<const std::size_t>(rows))
                         .value();
  std::vector<int> out(states.size());
  for (std::size_t r = 0; r < states.size(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

/// Greedy continuation of `state`, which is extended in place with every
/// emitted token via `policy`. Stops after a stop token or max_new tokens.
template <class T>
std::vector<int> generate_greedy(const ParameterStore<T>& params, const ModelConfig& cfg, DecodeState& state,
                                 std::span<const int> stop_tokens, std::size_t max_new,
                                 const ExtendPolicy& policy = extend_causal) {
  std::vector<int> out;
  if (state.tokens.empty()) throw ShapeError("generate_greedy: empty prefix");
  while (out.size() < max_new) {
    if (state.tokens.size() > cfg.max_context) throw ContextOverflow("generate_greedy: context exhausted");
    const DecodeState* ptr = &state;
    const int tok = next_tokens(params, cfg, std::span<const DecodeState* const>(&ptr, 1))[0];
    out.push_back(tok);
    policy(state, tok);
    if (std::find(stop_tokens.begin(), stop_tokens.end(), tok) != stop_tokens.end()) break;
  }
  return out;
}

}  // namespace scratchlab::model
