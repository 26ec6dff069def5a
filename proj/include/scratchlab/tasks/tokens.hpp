#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scratchlab/errors.hpp"

namespace scratchlab::tasks {

/// A token string: each element is one atomic vocabulary token. Node names
/// such as "v123" are single tokens; everything else is one character.
using Tokens = std::vector<std::string>;

using Rng = std::mt19937_64;

inline constexpr const char* kStart = "<START>";
inline constexpr const char* kEos = "<EOS>";
inline constexpr const char* kStateSep = "#";
inline constexpr const char* kPlaceholder = "_";
inline constexpr std::size_t kNodePool = 1000;

inline std::string node_name(std::size_t i) { return "v" + std::to_string(i); }

/// Concatenated text of a token string.
inline std::string render(const Tokens& t) {
  std::string s;
  for (const auto& x : t) s += x;
  return s;
}

/// One token per character.
inline Tokens chars(std::string_view s) {
  Tokens t;
  t.reserve(s.size());
  for (char c : s) t.emplace_back(1, c);
  return t;
}

inline Tokens concat(Tokens a, const Tokens& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Uniform integer in [lo, hi].
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Task vocabulary: <START>, <EOS>, printable ASCII 33..126, then optional
/// node tokens v0..v{nodes-1}.
class Vocabulary {
 public:
  static Vocabulary graph(std::size_t nodes = kNodePool) { return Vocabulary(nodes); }
  static Vocabulary chars() { return Vocabulary(0); }

  /// Rebuilds a vocabulary from its description ("graph"/"chars" plus node count).
  static Vocabulary from_description(const std::string& kind, std::size_t nodes) {
    if (kind == "chars") return chars();
    if (kind == "graph") return graph(nodes);
    throw ConfigError("unknown vocabulary kind " + kind);
  }

  std::string kind() const { return nodes_ ? "graph" : "chars"; }
  std::size_t node_count() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return tokens_.size(); }

  int start() const noexcept { return 0; }
  int eos() const noexcept { return 1; }
  int sep() const { return id(kStateSep); }

  bool contains(const std::string& tok) const { return ids_.count(tok) != 0; }

  int id(const std::string& tok) const {
    auto it = ids_.find(tok);
    if (it == ids_.end()) throw ConfigError("token '" + tok + "' is not in the vocabulary");
    return it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw ConfigError("token id " + std::to_string(id) + " out of range");
    }
    return tokens_[id];
  }

  std::vector<int> encode(const Tokens& t) const {
    std::vector<int> out;
    out.reserve(t.size());
    for (const auto& s : t) out.push_back(id(s));
    return out;
  }

  Tokens decode(const std::vector<int>& ids) const {
    Tokens t;
    t.reserve(ids.size());
    for (int i : ids) t.push_back(token(i));
    return t;
  }

 private:
  explicit Vocabulary(std::size_t nodes) : nodes_(nodes) {
    add(kStart);
    add(kEos);
    for (int c = 33; c <= 126; ++c) add(std::string(1, static_cast<char>(c)));
    for (std::size_t i = 0; i < nodes; ++i) add(node_name(i));
  }

  void add(const std::string& t) {
    ids_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }

  std::size_t nodes_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// A generated example: question, ordered scratchpad states, final answer.
/// `prelude` holds tokens placed before <START> that are not part of the
/// question proper (the random answer buffer of the spaces addition format).
struct Sample {
  std::string task;
  Tokens question;
  Tokens prelude;
  std::vector<Tokens> states;
  Tokens answer;
  std::map<std::string, std::int64_t> meta;
};

}  // namespace scratchlab::tasks
