#pragma once

// Flat key=value configuration records: one pair per line, '#' starts a
// comment line, surrounding whitespace is ignored. Later keys override
// earlier ones.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "scratchlab/errors.hpp"

namespace scratchlab {

using KeyValues = std::map<std::string, std::string>;

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline KeyValues parse_kv(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " has no '=': " + std::string(line));
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + " has an empty key");
    out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

inline KeyValues read_kv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_kv(ss.str());
}

inline std::string format_kv(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

template <class N>
N parse_number(std::string_view key, std::string_view s) {
  N v{};
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) {
    throw ConfigError("invalid value for " + std::string(key) + ": '" + std::string(s) + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean for " + std::string(key) + ": '" + std::string(s) + "'");
}

/// Overwrites `dst` when `key` is present.
template <class N>
void get_kv(const KeyValues& kv, const std::string& key, N& dst) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  if constexpr (std::is_same_v<N, bool>) {
    dst = parse_bool(key, it->second);
  } else if constexpr (std::is_same_v<N, std::string>) {
    dst = it->second;
  } else {
    dst = parse_number<N>(key, it->second);
  }
}

}  // namespace scratchlab
