#pragma once

// Scratchpad builders. Every state is a Tokens value free of <START>,
// <EOS> and the state separator.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "scratchlab/errors.hpp"
#include "scratchlab/tasks/arith.hpp"
#include "scratchlab/tasks/graph.hpp"
#include "scratchlab/tasks/tokens.hpp"

namespace scratchlab::scratchpad {

using tasks::GraphInstance;
using tasks::Rng;
using tasks::Sample;
using tasks::Tokens;

namespace detail {

/// Successor walk from the source until the destination or the source
/// recurs. Returns the visited vertices and the connectivity bit.
inline std::pair<std::vector<int>, int> successor_walk(const GraphInstance& g) {
  if (g.query.size() < 2) throw ShapeError("scratchpad needs a source/destination query");
  std::vector<int> succ(g.nodes.size(), -1);
  for (auto [u, v] : g.edges) {
    if (succ[u] >= 0) throw ShapeError("successor walk needs out-degree 1 (node " + g.nodes[u] + ")");
    succ[u] = v;
  }
  const int s = g.query[0], t = g.query[1];
  std::vector<int> walk{s};
  int v = s;
  for (std::size_t step = 0; step <= g.nodes.size(); ++step) {
    v = succ[v];
    if (v < 0) throw ShapeError("successor walk reached a vertex without an outgoing edge");
    walk.push_back(v);
    if (v == t) return {walk, 1};
    if (v == s) return {walk, 0};
  }
  throw ShapeError("successor walk did not terminate");
}

}  // namespace detail

/// Flat DFS scratchpad "v0>v1>...>vk;b".
inline Tokens dfs_scratchpad(const GraphInstance& g) {
  const auto [walk, bit] = detail::successor_walk(g);
  Tokens t;
  for (std::size_t i = 0; i < walk.size(); ++i) {
    if (i) t.push_back(">");
    t.push_back(g.nodes[walk[i]]);
  }
  t.push_back(";");
  t.push_back(std::to_string(bit));
  return t;
}

/// Inductive cycle states: one vertex per state, the last carrying ";b".
inline std::vector<Tokens> inductive_cycle_states(const GraphInstance& g) {
  const auto [walk, bit] = detail::successor_walk(g);
  std::vector<Tokens> states;
  for (int v : walk) states.push_back({g.nodes[v]});
  states.back().push_back(";");
  states.back().push_back(std::to_string(bit));
  return states;
}

/// State i is the parity of the first i bits, i = 1..k.
inline std::vector<Tokens> cumulative_parity_states(const std::vector<int>& bits, std::size_t k) {
  if (k > bits.size()) throw ShapeError("cumulative parity: k exceeds the number of bits");
  std::vector<Tokens> states;
  int p = 0;
  for (std::size_t i = 0; i < k; ++i) {
    p ^= bits[i] & 1;
    states.push_back({std::to_string(p)});
  }
  return states;
}

/// Bits of a plain bit-string question (characters before '=').
inline std::vector<int> question_bits(const Tokens& q) {
  std::vector<int> bits;
  for (const auto& t : q) {
    if (t == "=") break;
    if (t == "0" || t == "1") bits.push_back(t == "1");
  }
  return bits;
}

/// "[p]v,c" per placed bit (p = slot index, c = running parity), then
/// "[d_amb]_,c".
inline std::vector<Tokens> parity_inductive_states(const Sample& s, int d_amb) {
  std::vector<Tokens> states;
  int p = 0, slot = 0;
  for (const auto& t : s.question) {
    if (t == "=") break;
    if (slot >= d_amb) throw FormatError("parity question longer than d_amb");
    if (t == "0" || t == "1") {
      p ^= t == "1";
      states.push_back(tasks::chars("[" + std::to_string(slot) + "]" + t + "," + std::to_string(p)));
    } else if (t != tasks::kPlaceholder) {
      throw FormatError("unexpected parity token '" + t + "'");
    }
    ++slot;
  }
  if (slot != d_amb) throw FormatError("parity question has " + std::to_string(slot) + " slots, expected d_amb");
  states.push_back(tasks::chars("[" + std::to_string(d_amb) + "]_," + std::to_string(p)));
  return states;
}

/// Random answer buffer: '$' followed by filler, `len` characters in total.
inline std::string answer_buffer(Rng& rng, std::size_t len) { return "$" + tasks::filler(rng, len - 1); }

struct SpacesScratchpad {
  std::string prelude;
  std::vector<Tokens> states;
};

/// Digit-by-digit addition over the spaces format. `buffer` is the initial
/// answer buffer ("$" + filler, d_amb + 2 characters).
inline SpacesScratchpad addition_states_spaces(const Sample& s, int d_amb, const std::string& buffer) {
  const std::string q = tasks::render(s.question);
  const auto plus = q.find('+');
  const auto eq = q.find('=');
  if (plus == std::string::npos || eq == std::string::npos || eq != q.size() - 1 ||
      q.size() != static_cast<std::size_t>(2 * d_amb + 2)) {
    throw FormatError("malformed spaces addition question " + q);
  }
  if (buffer.size() != static_cast<std::size_t>(d_amb + 2) || buffer[0] != '$') {
    throw FormatError("answer buffer must be '$' plus filler of total length d_amb + 2");
  }
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  // Moves left from `from` skipping placeholders; stops on a digit or any
  // other character (returned as is), or returns -1 at the left edge.
  auto step_left = [&](int from) {
    int p = from;
    while (p >= 0 && q[p] == '_') --p;
    return p;
  };
  int px = step_left(static_cast<int>(plus) - 1);
  int py = step_left(static_cast<int>(eq) - 1);
  const int y_stop = static_cast<int>(plus);
  auto x_live = [&] { return px >= 0 && is_digit(q[px]); };
  auto y_live = [&] { return py > y_stop && is_digit(q[py]); };

  SpacesScratchpad out;
  out.prelude = buffer;
  std::string ans = buffer;
  int carry = 0;
  char ptr[32];
  while (x_live() || y_live() || carry) {
    const char dx = x_live() ? q[px] : '_';
    const char dy = y_live() ? q[py] : '_';
    const int sum = (dx == '_' ? 0 : dx - '0') + (dy == '_' ? 0 : dy - '0') + carry;
    carry = sum >= 10;
    if (ans.back() == '$') throw FormatError("answer buffer underflow");
    ans = std::string(1, static_cast<char>('0' + sum % 10)) + ans.substr(0, ans.size() - 1);
    std::string st;
    std::snprintf(ptr, sizeof ptr, "[%02d]", x_live() ? px : -1);
    st += ptr;
    st += dx;
    std::snprintf(ptr, sizeof ptr, "[%02d]", py);
    st += ptr;
    st += dy;
    st += "c" + std::to_string(carry) + "r" + ans;
    out.states.push_back(tasks::chars(st));
    if (x_live()) px = step_left(px - 1);
    if (y_live()) py = step_left(py - 1);
  }
  return out;
}

struct ShiftScratchpad {
  std::string state0_suffix;  // ans_0 + "|0", appended to the question to form state 0
  std::vector<Tokens> states;
};

/// Shift-method addition. Each step rotates both operands right by one,
/// prepends the sum digit to the answer buffer and drops its last
/// character. An operand whose rightmost character is already '$' stays
/// put and contributes 0. The final state is the buffer with the last
/// carry prepended when it is 1.
inline ShiftScratchpad addition_states_shift(const Sample& s, int d_amb, const std::string& ans0) {
  const std::string q = tasks::render(s.question);
  const auto plus = q.find('+');
  const auto eq = q.find('=');
  if (plus == std::string::npos || eq == std::string::npos || eq != q.size() - 1) {
    throw FormatError("malformed shift addition question " + q);
  }
  std::string x = q.substr(0, plus);
  std::string y = q.substr(plus + 1, eq - plus - 1);
  if (x.find('$') == std::string::npos || y.find('$') == std::string::npos) {
    throw FormatError("shift operands must contain '$'");
  }
  if (ans0.size() != static_cast<std::size_t>(d_amb + 1) || ans0[0] != '$') {
    throw FormatError("shift answer buffer must be '$' plus filler of total length d_amb + 1");
  }
  auto digit = [](char c) {
    if (c < '0' || c > '9') throw FormatError("shift operand has a non-digit right of '$'");
    return c - '0';
  };
  auto rotate = [](std::string& v) { v = v.back() + v.substr(0, v.size() - 1); };

  ShiftScratchpad out;
  out.state0_suffix = ans0 + "|0";
  std::string ans = ans0;
  int carry = 0;
  while (x.back() != '$' || y.back() != '$') {
    const int dx = x.back() == '$' ? 0 : digit(x.back());
    const int dy = y.back() == '$' ? 0 : digit(y.back());
    const int sum = dx + dy + carry;
    carry = sum >= 10;
    if (x.back() != '$') rotate(x);
    if (y.back() != '$') rotate(y);
    if (ans.back() == '$') throw FormatError("answer buffer underflow");
    ans = std::string(1, static_cast<char>('0' + sum % 10)) + ans.substr(0, ans.size() - 1);
    out.states.push_back(tasks::chars(x + "+" + y + "=" + ans + "|" + std::to_string(carry)));
  }
  out.states.push_back(tasks::chars(carry ? "1" + ans : ans));
  return out;
}

// ------------------------------------------------ attaching to samples

inline void attach_cycle_states(Sample& s, const GraphInstance& g) { s.states = inductive_cycle_states(g); }

inline void attach_dfs(Sample& s, const GraphInstance& g) { s.states = {dfs_scratchpad(g)}; }

inline void attach_parity_states(Sample& s, int d_amb) { s.states = parity_inductive_states(s, d_amb); }

/// Cumulative parity over the first half of a half-parity question.
inline void attach_half_parity_states(Sample& s) {
  const auto bits = question_bits(s.question);
  s.states = cumulative_parity_states(bits, bits.size() / 2);
}

/// Draws the answer buffer from `rng` and stores it as the prelude.
inline void attach_addition_spaces(Sample& s, int d_amb, Rng& rng) {
  auto sp = addition_states_spaces(s, d_amb, answer_buffer(rng, d_amb + 2));
  s.prelude = tasks::chars(sp.prelude);
  s.states = std::move(sp.states);
}

/// The question plus the "ans_0|0" suffix is state 0; no <START> is used.
inline void attach_addition_shift(Sample& s, int d_amb, Rng& rng) {
  auto sp = addition_states_shift(s, d_amb, answer_buffer(rng, d_amb + 1));
  s.prelude = tasks::chars(sp.state0_suffix);
  s.states = std::move(sp.states);
  s.meta["no_start"] = 1;
}

// ------------------------------------------------------- answer extraction

enum class AnswerRule { after_semicolon, after_comma, left_of_dollar, whole };

/// Extracts the final answer from the last state. Returns an empty token
/// string when the state does not follow the rule.
inline Tokens extract_answer(AnswerRule rule, const Tokens& final_state) {
  auto find = [&](const char* tok) {
    for (std::size_t i = final_state.size(); i-- > 0;)
      if (final_state[i] == tok) return static_cast<long>(i);
    return -1L;
  };
  switch (rule) {
    case AnswerRule::whole:
      return final_state;
    case AnswerRule::after_semicolon:
    case AnswerRule::after_comma: {
      const long i = find(rule == AnswerRule::after_semicolon ? ";" : ",");
      if (i < 0 || static_cast<std::size_t>(i) + 2 != final_state.size()) return {};
      return {final_state.back()};
    }
    case AnswerRule::left_of_dollar: {
      const long i = find("$");
      if (i < 0) return {};
      long j = i;
      while (j > 0 && final_state[j - 1].size() == 1 && final_state[j - 1][0] >= '0' && final_state[j - 1][0] <= '9') --j;
      if (j == i) return {};
      return Tokens(final_state.begin() + j, final_state.begin() + i);
    }
  }
  return {};
}

}  // namespace scratchlab::scratchpad
