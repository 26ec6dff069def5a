#pragma once

// Mutual information between a subset of input tokens (optionally together
// with the token histogram of the whole input) and a label, in bits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "scratchlab/errors.hpp"
#include "scratchlab/tasks/tokens.hpp"

namespace scratchlab::globality {

using tasks::Tokens;

/// One outcome of a finite joint law. Weights are integer multiplicities,
/// so every probability is the exact rational weight / total.
struct Outcome {
  Tokens x;
  std::string y;
  std::uint64_t weight = 1;
};

/// Finite support of (X, Y). All inputs have the same length.
struct DiscreteJoint {
  std::vector<Outcome> support;

  std::size_t length() const { return support.empty() ? 0 : support.front().x.size(); }

  std::uint64_t total() const {
    std::uint64_t w = 0;
    for (const auto& o : support) w += o.weight;
    return w;
  }

  void validate() const {
    if (support.empty()) throw ShapeError("joint law has an empty support");
    const std::size_t n = length();
    unsigned __int128 w = 0;
    for (const auto& o : support) {
      if (o.x.size() != n) throw ShapeError("joint law inputs differ in length");
      if (o.weight == 0) throw ShapeError("joint law outcome with zero weight");
      w += o.weight;
    }
    if (w > (unsigned __int128)(std::uint64_t(1) << 62)) throw ShapeError("joint law weights too large for exact mode");
  }
};

/// Produces one (X, Y) draw.
using Sampler = std::function<Outcome(std::mt19937_64&)>;

/// Canonical text of the token histogram: "token:count" pairs sorted by token.
inline std::string histogram_key(const Tokens& x) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : x) ++counts[t];
  std::string key;
  for (const auto& [tok, c] : counts) {
    key += tok;
    key += '\x1e';
    key += std::to_string(c);
    key += '\x1f';
  }
  return key;
}

namespace detail {

inline std::string subset_key(const Tokens& x, std::span<const std::size_t> S, const std::string* hist) {
  std::string key;
  for (std::size_t i : S) {
    if (i >= x.size()) throw ShapeError("subset index " + std::to_string(i) + " out of range");
    key += x[i];
    key += '\x1f';
  }
  if (hist) {
    key += '\x1d';
    key += *hist;
  }
  return key;
}

struct Counts {
  std::map<std::string, std::uint64_t> x;
  std::map<std::string, std::uint64_t> y;
  std::map<std::pair<std::string, std::string>, std::uint64_t> xy;
  std::uint64_t total = 0;
};

// MI of the law given by the counts. A term whose joint weight factorizes
// exactly contributes exactly zero.
inline double mi_bits(const Counts& c) {
  const unsigned __int128 W = c.total;
  long double acc = 0;
  for (const auto& [k, cxy] : c.xy) {
    const std::uint64_t cx = c.x.at(k.first), cy = c.y.at(k.second);
    if ((unsigned __int128)cxy * W == (unsigned __int128)cx * cy) continue;
    const long double r = std::log2l(static_cast<long double>(cxy)) + std::log2l(static_cast<long double>(W)) -
                          std::log2l(static_cast<long double>(cx)) - std::log2l(static_cast<long double>(cy));
    acc += static_cast<long double>(cxy) / static_cast<long double>(W) * r;
  }
  return std::max(0.0, static_cast<double>(acc));
}

}  // namespace detail

/// Precomputed view of a joint law for repeated subset queries.
class MiTable {
 public:
  explicit MiTable(DiscreteJoint joint) : joint_(std::move(joint)) {
    joint_.validate();
    hist_.reserve(joint_.support.size());
    for (const auto& o : joint_.support) hist_.push_back(histogram_key(o.x));
  }

  std::size_t length() const { return joint_.length(); }
  const DiscreteJoint& joint() const { return joint_; }

  detail::Counts counts(std::span<const std::size_t> S, bool include_histogram) const {
    detail::Counts c;
    for (std::size_t i = 0; i < joint_.support.size(); ++i) {
      const auto& o = joint_.support[i];
      std::string key = detail::subset_key(o.x, S, include_histogram ? &hist_[i] : nullptr);
      c.x[key] += o.weight;
      c.y[o.y] += o.weight;
      c.xy[{std::move(key), o.y}] += o.weight;
      c.total += o.weight;
    }
    return c;
  }

  double mi(std::span<const std::size_t> S, bool include_histogram) const {
    return detail::mi_bits(counts(S, include_histogram));
  }

  /// H(Y) in bits.
  double label_entropy() const {
    std::map<std::string, std::uint64_t> cy;
    std::uint64_t W = 0;
    for (const auto& o : joint_.support) {
      cy[o.y] += o.weight;
      W += o.weight;
    }
    long double h = 0;
    for (const auto& [y, c] : cy) {
      const long double p = static_cast<long double>(c) / static_cast<long double>(W);
      h -= p * std::log2l(p);
    }
    return static_cast<double>(h);
  }

 private:
  DiscreteJoint joint_;
  std::vector<std::string> hist_;
};

/// Exact I(X[S], hist(X); Y) in bits (histogram only when requested).
inline double exact_mi(const DiscreteJoint& joint, std::span<const std::size_t> S, bool include_histogram = false) {
  return MiTable(joint).mi(S, include_histogram);
}

/// Plug-in estimate with the Miller-Madow correction
/// (K_x + K_y - K_xy - 1) / (2N ln 2) bits, K counting occupied cells.
struct PluginEstimate {
  double raw_bits = 0.0;
  double correction_bits = 0.0;
  double bits = 0.0;  // raw + correction, floored at zero
  std::size_t samples = 0;
};

inline PluginEstimate plugin_from_counts(const detail::Counts& c) {
  PluginEstimate e;
  e.samples = static_cast<std::size_t>(c.total);
  e.raw_bits = detail::mi_bits(c);
  const double kx = static_cast<double>(c.x.size()), ky = static_cast<double>(c.y.size()),
               kxy = static_cast<double>(c.xy.size());
  e.correction_bits = (kx + ky - kxy - 1.0) / (2.0 * static_cast<double>(c.total) * std::log(2.0));
  e.bits = std::max(0.0, e.raw_bits + e.correction_bits);
  return e;
}

/// Draws n_samples outcomes as an empirical joint law (each draw weight 1).
inline DiscreteJoint draw_samples(const Sampler& sampler, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw ShapeError("plugin estimate needs at least one sample");
  std::mt19937_64 rng(seed);
  DiscreteJoint d;
  d.support.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) d.support.push_back(sampler(rng));
  return d;
}

inline PluginEstimate plugin_mi(const Sampler& sampler, std::span<const std::size_t> S, bool include_histogram,
                                std::size_t n_samples, std::uint64_t seed = 0) {
  const MiTable table(draw_samples(sampler, n_samples, seed));
  return plugin_from_counts(table.counts(S, include_histogram));
}

}  // namespace scratchlab::globality
