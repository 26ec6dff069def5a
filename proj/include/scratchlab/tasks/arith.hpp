#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "scratchlab/errors.hpp"
#include "scratchlab/tasks/tokens.hpp"

namespace scratchlab::tasks {

/// Random lowercase filler text.
inline std::string filler(Rng& rng, std::size_t len) {
  std::string s(len, 'a');
  for (auto& c : s) c = static_cast<char>('a' + uniform_int(rng, 0, 25));
  return s;
}

/// Decimal sum of two non-negative digit strings.
inline std::string add_decimal(const std::string& x, const std::string& y) {
  std::string out;
  int carry = 0;
  for (std::size_t i = 0; i < std::max(x.size(), y.size()) || carry; ++i) {
    int d = carry;
    if (i < x.size()) d += x[x.size() - 1 - i] - '0';
    if (i < y.size()) d += y[y.size() - 1 - i] - '0';
    out.push_back(static_cast<char>('0' + d % 10));
    carry = d / 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

/// Uniform number with exactly `digits` digits (0..9 when digits == 1).
inline std::string random_number(Rng& rng, int digits) {
  if (digits < 1) throw ConfigError("numbers need at least one digit");
  std::string s;
  s.push_back(static_cast<char>('0' + (digits == 1 ? uniform_int(rng, 0, 9) : uniform_int(rng, 1, 9))));
  for (int i = 1; i < digits; ++i) s.push_back(static_cast<char>('0' + uniform_int(rng, 0, 9)));
  return s;
}

/// Parity with placeholders: n_bits uniform bits in n_bits distinct slots
/// of a d_amb-slot window, '_' elsewhere, terminated by '='. Answer "0"/"1".
inline Sample gen_parity(int n_bits, int d_amb, std::uint64_t seed) {
  if (n_bits < 1 || n_bits > d_amb) throw ConfigError("parity needs 1 <= n_bits <= d_amb");
  Rng rng(seed);
  std::vector<int> slots(d_amb);
  for (int i = 0; i < d_amb; ++i) slots[i] = i;
  for (int i = 0; i < n_bits; ++i) std::swap(slots[i], slots[uniform_int(rng, i, d_amb - 1)]);
  std::string text(d_amb, '_');
  int parity = 0;
  for (int i = 0; i < n_bits; ++i) {
    const int b = static_cast<int>(uniform_int(rng, 0, 1));
    text[slots[i]] = static_cast<char>('0' + b);
    parity ^= b;
  }
  Sample s;
  s.task = "parity";
  s.question = chars(text + "=");
  s.answer = {std::to_string(parity)};
  s.meta["n_bits"] = n_bits;
  s.meta["d_amb"] = d_amb;
  s.meta["seed"] = static_cast<std::int64_t>(seed);
  return s;
}

/// n i.i.d. bits terminated by '='; answer is the parity of the first n/2.
inline Sample gen_half_parity(int n, std::uint64_t seed) {
  if (n < 2 || n % 2) throw ConfigError("half parity needs an even n >= 2");
  Rng rng(seed);
  std::string text;
  int parity = 0;
  for (int i = 0; i < n; ++i) {
    const int b = static_cast<int>(uniform_int(rng, 0, 1));
    text.push_back(static_cast<char>('0' + b));
    if (i < n / 2) parity ^= b;
  }
  Sample s;
  s.task = "half_parity";
  s.question = chars(text + "=");
  s.answer = {std::to_string(parity)};
  s.meta["n"] = n;
  s.meta["seed"] = static_cast<std::int64_t>(seed);
  return s;
}

enum class AdditionFormat { spaces, shift };

/// Addition question. spaces: the digits of x, '+', the digits of y placed
/// in order at random slots of a 2*d_amb+1 window, '_' elsewhere, then '='.
/// shift: each operand is filler(d_amb - len) + '$' + digits; "X+Y=".
inline Sample gen_addition(int nx, int ny, int d_amb, AdditionFormat format, std::uint64_t seed) {
  if (nx < 1 || ny < 1 || nx > d_amb || ny > d_amb) {
    throw ConfigError("operand lengths must be in [1, d_amb]");
  }
  Rng rng(seed);
  const std::string x = random_number(rng, nx);
  const std::string y = random_number(rng, ny);
  std::string text;
  if (format == AdditionFormat::spaces) {
    const int slots = 2 * d_amb + 1;
    const int used = nx + ny + 1;
    std::vector<int> pos(slots);
    for (int i = 0; i < slots; ++i) pos[i] = i;
    for (int i = 0; i < used; ++i) std::swap(pos[i], pos[uniform_int(rng, i, slots - 1)]);
    pos.resize(used);
    std::sort(pos.begin(), pos.end());
    text.assign(slots, '_');
    const std::string payload = x + "+" + y;
    for (int i = 0; i < used; ++i) text[pos[i]] = payload[i];
  } else {
    text = filler(rng, d_amb - nx) + "$" + x + "+" + filler(rng, d_amb - ny) + "$" + y;
  }
  Sample s;
  s.task = format == AdditionFormat::spaces ? "add_spaces" : "add_shift";
  s.question = chars(text + "=");
  s.answer = chars(add_decimal(x, y));
  s.meta["nx"] = nx;
  s.meta["ny"] = ny;
  s.meta["d_amb"] = d_amb;
  s.meta["seed"] = static_cast<std::int64_t>(seed);
  return s;
}

// ---------------------------------------------------------------- oracles

/// Parity of every bit in a parity / half-parity question (first `limit`
/// bits when limit >= 0).
inline int parity_oracle(const Tokens& question, int limit = -1) {
  int p = 0, seen = 0;
  for (const auto& t : question) {
    if (t == "=") break;
    if (t != "0" && t != "1") continue;
    if (limit >= 0 && seen >= limit) break;
    p ^= t == "1";
    ++seen;
  }
  return p;
}

/// Decimal sum recovered directly from either addition question format.
inline std::string addition_oracle(const Tokens& question) {
  const std::string q = render(question);
  const auto plus = q.find('+');
  const auto eq = q.find('=');
  if (plus == std::string::npos || eq == std::string::npos || eq < plus) {
    throw FormatError("malformed addition question " + q);
  }
  auto digits = [](const std::string& part) {
    std::string d;
    const auto dollar = part.find('$');
    const std::string body = dollar == std::string::npos ? part : part.substr(dollar + 1);
    for (char c : body)
      if (c >= '0' && c <= '9') d.push_back(c);
    if (d.empty()) throw FormatError("addition operand without digits");
    return d;
  };
  return add_decimal(digits(q.substr(0, plus)), digits(q.substr(plus + 1, eq - plus - 1)));
}

}  // namespace scratchlab::tasks
