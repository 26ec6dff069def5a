#pragma once

// Training encodings. A target flag at position t means token t is predicted
// from row t-1; position 0 is never a target.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "scratchlab/errors.hpp"
#include "scratchlab/tasks/tokens.hpp"

namespace scratchlab::scratchpad {

using tasks::Sample;
using tasks::Tokens;
using tasks::Vocabulary;

struct EncodeOptions {
  bool loss_on_question = true;
  std::size_t max_context = 0;  // 0 disables the length check
};

/// One causal training sequence.
struct Sequence {
  std::vector<int> tokens;
  std::vector<std::uint8_t> loss_mask;
};

struct InductiveEncoding {
  std::vector<int> tokens;
  std::vector<std::uint8_t> loss_mask;
  std::vector<int> group;  // 0 = permanent memory
  std::vector<int> positions;

  std::size_t size() const noexcept { return tokens.size(); }
};

/// Permanent memory and the state list the encoders work on. Samples marked
/// meta["no_start"] (the shift format) have no permanent memory; their
/// question plus prelude becomes the first state.
struct InductiveLayout {
  std::vector<int> permanent;
  std::vector<std::vector<int>> states;
  bool question_is_state = false;
};

inline bool has_no_start(const Sample& s) {
  auto it = s.meta.find("no_start");
  return it != s.meta.end() && it->second != 0;
}

inline InductiveLayout inductive_layout(const Vocabulary& vocab, const Sample& s) {
  auto check_payload = [&](const Tokens& t, const char* what) {
    for (const auto& x : t) {
      if (x == tasks::kStart || x == tasks::kEos || x == tasks::kStateSep) {
        throw FormatError(std::string(what) + " contains the reserved token " + x);
      }
    }
  };
  check_payload(s.question, "question");
  check_payload(s.prelude, "prelude");
  if (s.states.empty()) throw FormatError("inductive encoding needs at least one state");
  InductiveLayout out;
  std::vector<int> q = vocab.encode(tasks::concat(s.question, s.prelude));
  if (has_no_start(s)) {
    out.question_is_state = true;
    out.states.push_back(std::move(q));
  } else {
    out.permanent = std::move(q);
    out.permanent.push_back(vocab.start());
  }
  for (const auto& st : s.states) {
    if (st.empty()) throw FormatError("empty scratchpad state");
    check_payload(st, "state");
    out.states.push_back(vocab.encode(st));
  }
  return out;
}

namespace detail {

inline void check_context(std::size_t len, const EncodeOptions& opt) {
  if (opt.max_context && len > opt.max_context) {
    throw ContextOverflow("encoded length " + std::to_string(len) + " exceeds max_context " +
                          std::to_string(opt.max_context));
  }
}

inline void append(Sequence& seq, const std::vector<int>& toks, bool loss) {
  for (int t : toks) {
    seq.loss_mask.push_back(loss && !seq.tokens.empty() ? 1 : 0);
    seq.tokens.push_back(t);
  }
}

inline void append(Sequence& seq, int tok, bool loss) { append(seq, std::vector<int>{tok}, loss); }

}  // namespace detail

/// One sequence per induction step: P.s1.end, then P.s_i.SEP.s_{i+1}.end,
/// where end is EOS on the last state and SEP otherwise. Loss on the final
/// state of each sequence (and on P, or on the question state, in the
/// first sequence when loss_on_question is set).
inline std::vector<Sequence> encode_split(const Vocabulary& vocab, const Sample& s, const EncodeOptions& opt = {}) {
  const auto lay = inductive_layout(vocab, s);
  const std::size_t k = lay.states.size();
  auto end_of = [&](std::size_t i) { return i + 1 == k ? vocab.eos() : vocab.sep(); };
  std::vector<Sequence> out;
  Sequence first;
  detail::append(first, lay.permanent, opt.loss_on_question);
  detail::append(first, lay.states[0], lay.question_is_state ? opt.loss_on_question : true);
  detail::append(first, end_of(0), true);
  out.push_back(std::move(first));
  for (std::size_t i = 0; i + 1 < k; ++i) {
    Sequence seq;
    detail::append(seq, lay.permanent, false);
    detail::append(seq, lay.states[i], false);
    detail::append(seq, vocab.sep(), false);
    detail::append(seq, lay.states[i + 1], true);
    detail::append(seq, end_of(i + 1), true);
    out.push_back(std::move(seq));
  }
  for (const auto& seq : out) detail::check_context(seq.tokens.size(), opt);
  return out;
}

/// Single packed sequence P | s1.end | s1.SEP s2.end | ... with the
/// duplicated copy of each earlier state unsupervised. Group g >= 1 sees
/// itself and group 0; its positions restart after P.
inline InductiveEncoding encode_duplicated(const Vocabulary& vocab, const Sample& s, const EncodeOptions& opt = {}) {
  const auto lay = inductive_layout(vocab, s);
  const std::size_t k = lay.states.size();
  const int t0 = static_cast<int>(lay.permanent.size());
  InductiveEncoding e;
  int pos = 0;
  auto push = [&](int tok, bool loss, int group) {
    e.loss_mask.push_back(loss && !e.tokens.empty() ? 1 : 0);
    e.tokens.push_back(tok);
    e.group.push_back(group);
    e.positions.push_back(pos++);
  };
  for (int t : lay.permanent) push(t, opt.loss_on_question, 0);
  for (std::size_t g = 1; g <= k; ++g) {
    pos = t0;
    const int gid = static_cast<int>(g);
    if (g > 1) {
      for (int t : lay.states[g - 2]) push(t, false, gid);
      push(vocab.sep(), false, gid);
    }
    const bool state_loss = g == 1 && lay.question_is_state ? opt.loss_on_question : true;
    for (int t : lay.states[g - 1]) push(t, state_loss, gid);
    push(g == k ? vocab.eos() : vocab.sep(), true, gid);
  }
  detail::check_context(e.size(), opt);
  return e;
}

/// Question (plus prelude) . START . target [. EOS], loss on the target
/// and EOS only. Used for the no-scratchpad and flat-scratchpad modes.
inline Sequence encode_plain(const Vocabulary& vocab, const Sample& s, const Tokens& target, bool eos,
                             const EncodeOptions& opt = {}) {
  Sequence seq;
  detail::append(seq, vocab.encode(tasks::concat(s.question, s.prelude)), false);
  detail::append(seq, vocab.start(), false);
  detail::append(seq, vocab.encode(target), true);
  if (eos) detail::append(seq, vocab.eos(), true);
  detail::check_context(seq.tokens.size(), opt);
  return seq;
}

/// States joined by the separator, for the flat-scratchpad mode.
inline Tokens flat_scratchpad(const Sample& s) {
  Tokens out;
  for (std::size_t i = 0; i < s.states.size(); ++i) {
    if (i) out.push_back(tasks::kStateSep);
    out.insert(out.end(), s.states[i].begin(), s.states[i].end());
  }
  return out;
}

inline nlohmann::json to_json(const InductiveEncoding& e) {
  return {{"tokens", e.tokens}, {"loss_mask", e.loss_mask}, {"group", e.group}, {"positions", e.positions}};
}

/// One JSON object per line.
inline std::string encoding_json_line(const InductiveEncoding& e) { return to_json(e).dump(); }

}  // namespace scratchlab::scratchpad
