#pragma once

// Enumerable laws used to measure globality on small instances, and the
// analytic edge-subset probability for the cycle task.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "scratchlab/globality/search.hpp"

namespace scratchlab::globality {

/// Successor list sigma over nodes 0..2n-1 (node i has the single edge i -> sigma[i]).
using Successors = std::vector<std::size_t>;

namespace detail {

inline std::size_t cycle_length_from(const Successors& s, std::size_t start) {
  std::size_t len = 1;
  for (std::size_t v = s[start]; v != start; v = s[v]) ++len;
  return len;
}

inline std::size_t steps_to(const Successors& s, std::size_t from, std::size_t to) {
  std::size_t d = 0;
  for (std::size_t v = from; v != to; v = s[v]) {
    if (++d > s.size()) return SIZE_MAX;
  }
  return d;
}

}  // namespace detail

/// Cycle-task graphs on 2n nodes with the query fixed to (0, n).
/// two_cycles: 0 and n on different n-cycles (label 0). Otherwise one
/// 2n-cycle with n at distance n from 0 (label 1).
inline std::vector<Successors> canonical_cycle_graphs(std::size_t n, bool two_cycles) {
  if (n < 2 || n > 5) throw ShapeError("canonical cycle enumeration supports 2 <= n <= 5");
  const std::size_t N = 2 * n;
  Successors s(N);
  std::iota(s.begin(), s.end(), 0);
  std::vector<Successors> out;
  do {
    const std::size_t l0 = detail::cycle_length_from(s, 0);
    if (two_cycles) {
      if (l0 == n && detail::cycle_length_from(s, n) == n && detail::steps_to(s, 0, n) == SIZE_MAX) out.push_back(s);
    } else if (l0 == N && detail::steps_to(s, 0, n) == n) {
      out.push_back(s);
    }
  } while (std::next_permutation(s.begin(), s.end()));
  return out;
}

/// Cycle task in canonical form: token i is the successor of node i, so
/// the input has one slot per edge in a fixed order. Classes equiprobable.
inline DiscreteJoint canonical_cycle_joint(std::size_t n) {
  const auto zero = canonical_cycle_graphs(n, true);
  const auto one = canonical_cycle_graphs(n, false);
  const std::uint64_t g = std::gcd(zero.size(), one.size());
  DiscreteJoint d;
  auto add = [&](const std::vector<Successors>& gs, const char* label, std::uint64_t w) {
    for (const auto& s : gs) {
      Tokens x;
      for (auto v : s) x.push_back(std::to_string(v));
      d.support.push_back({std::move(x), label, w});
    }
  };
  add(zero, "0", one.size() / g);
  add(one, "1", zero.size() / g);
  return d;
}

/// Search trace from node 0: 0, sigma(0), ... until 0 recurs or n is reached,
/// then the label. Same length in both classes.
inline Tokens dfs_trace(const Successors& s, std::size_t n) {
  Tokens y{"0"};
  std::size_t v = 0;
  while (true) {
    v = s[v];
    y.push_back(std::to_string(v));
    if (v == 0 || v == n) break;
  }
  y.push_back(v == n ? "1" : "0");
  return y;
}

/// Cycle task with the search-trace scratchpad: the input lists the 2n
/// edges as (source, target) token pairs in every order.
inline std::vector<StepOutcome> cycle_dfs_steps(std::size_t n) {
  if (n > 3) throw ShapeError("cycle_dfs_steps enumerates edge orders; n <= 3");
  const auto zero = canonical_cycle_graphs(n, true);
  const auto one = canonical_cycle_graphs(n, false);
  const std::uint64_t g = std::gcd(zero.size(), one.size());
  std::vector<StepOutcome> out;
  auto add = [&](const std::vector<Successors>& gs, std::uint64_t w) {
    for (const auto& s : gs) {
      std::vector<std::size_t> order(s.size());
      std::iota(order.begin(), order.end(), 0);
      const Tokens y = dfs_trace(s, n);
      do {
        Tokens x;
        for (auto u : order) {
          x.push_back(std::to_string(u));
          x.push_back(std::to_string(s[u]));
        }
        out.push_back({std::move(x), y, w});
      } while (std::next_permutation(order.begin(), order.end()));
    }
  };
  add(zero, one.size() / g);
  add(one, zero.size() / g);
  return out;
}

/// Uniform bits b_0..b_{n-1} with label the parity of the bits in `support`.
inline DiscreteJoint parity_joint(std::size_t n_bits, const std::vector<std::size_t>& support) {
  if (n_bits == 0 || n_bits > 20) throw ShapeError("parity_joint supports 1..20 bits");
  DiscreteJoint d;
  for (std::uint64_t m = 0; m < (std::uint64_t(1) << n_bits); ++m) {
    Tokens x;
    for (std::size_t i = 0; i < n_bits; ++i) x.push_back((m >> i) & 1 ? "1" : "0");
    int p = 0;
    for (auto i : support) p ^= static_cast<int>((m >> i) & 1);
    d.support.push_back({std::move(x), p ? "1" : "0", 1});
  }
  return d;
}

/// Uniform bits with the cumulative-parity scratchpad y_t = b_0 ^ ... ^ b_t
/// over the first k bits.
inline std::vector<StepOutcome> cumulative_parity_steps(std::size_t n_bits, std::size_t k) {
  if (k == 0 || k > n_bits) throw ShapeError("cumulative parity needs 1 <= k <= n_bits");
  std::vector<StepOutcome> out;
  for (const auto& o : parity_joint(n_bits, {}).support) {
    Tokens y;
    int p = 0;
    for (std::size_t t = 0; t < k; ++t) {
      p ^= o.x[t] == "1";
      y.push_back(p ? "1" : "0");
    }
    out.push_back({o.x, std::move(y), 1});
  }
  return out;
}

/// Draws outcomes of a finite law with probability proportional to weight.
inline Sampler sampler_from(const DiscreteJoint& d) {
  std::vector<double> w;
  for (const auto& o : d.support) w.push_back(static_cast<double>(o.weight));
  auto dist = std::make_shared<std::discrete_distribution<std::size_t>>(w.begin(), w.end());
  auto support = std::make_shared<std::vector<Outcome>>(d.support);
  return [dist, support](std::mt19937_64& rng) { return (*support)[(*dist)(rng)]; };
}

// ---- analytic edge-subset probability ----

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

struct CycleAnalytic {
  cpp_rational value;    // exact (2 + 2n) / C(2n, n)
  double approx = 0.0;
  bool big_integer = false;  // C(2n, n) did not fit 64 bits
};

/// Probability that n of the 2n edges form one of the two cycles, plus the
/// probability that they form an open path in the single cycle, each taken
/// within its own class: (2 + 2n) / C(2n, n).
inline CycleAnalytic cycle_analytic(std::size_t n) {
  if (n < 2) throw ShapeError("cycle_analytic needs n >= 2");
  CycleAnalytic r;
  // C(2n, n) in 64 bits while each partial product stays in range.
  std::uint64_t c = 1;
  bool fits = true;
  for (std::uint64_t i = 1; i <= n && fits; ++i) {
    const std::uint64_t num = n + i;
    const std::uint64_t g = std::gcd(c, i);
    const std::uint64_t a = c / g, b = i / g;  // b divides num
    if (num / b > std::numeric_limits<std::uint64_t>::max() / a) {
      fits = false;
    } else {
      c = a * (num / b);
    }
  }
  cpp_int binom;
  if (fits) {
    binom = c;
  } else {
    r.big_integer = true;
    binom = 1;
    for (std::size_t i = 1; i <= n; ++i) binom = binom * (n + i) / i;
  }
  r.value = cpp_rational(cpp_int(2 + 2 * n), binom);
  r.approx = r.value.convert_to<double>();
  return r;
}

enum class EdgeShape { none, cycle, open_path };

/// Whether the given edges form a single directed cycle or a single open path.
inline EdgeShape classify_edges(const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (edges.empty()) return EdgeShape::none;
  std::map<std::size_t, std::size_t> succ, indeg;
  std::set<std::size_t> nodes;
  for (auto [u, v] : edges) {
    if (succ.count(u)) return EdgeShape::none;
    succ[u] = v;
    ++indeg[v];
    nodes.insert(u);
    nodes.insert(v);
  }
  for (auto& [v, d] : indeg)
    if (d > 1) return EdgeShape::none;
  std::size_t start = edges.front().first;
  const bool closed = nodes.size() == edges.size();
  if (!closed) {
    if (nodes.size() != edges.size() + 1) return EdgeShape::none;
    std::size_t heads = 0;
    for (auto [u, v] : edges) {
      if (!indeg.count(u)) {
        start = u;
        ++heads;
      }
    }
    if (heads != 1) return EdgeShape::none;
  }
  std::size_t steps = 0;
  for (std::size_t v = start; succ.count(v) && steps <= edges.size(); v = succ[v]) {
    ++steps;
    if (closed && succ[v] == start) break;
  }
  if (steps != edges.size()) return EdgeShape::none;
  return closed ? EdgeShape::cycle : EdgeShape::open_path;
}

struct CycleMonteCarlo {
  double p_cycle_two = 0.0;  // among two-cycle graphs
  double p_path_one = 0.0;   // among one-cycle graphs
  double sum = 0.0;
  double stderr_sum = 0.0;
  std::size_t trials = 0;
};

/// Frequencies of a uniform n-subset of edges forming a cycle (two-cycle
/// class) or an open path (one-cycle class), on freshly drawn graphs.
inline CycleMonteCarlo cycle_monte_carlo(std::size_t n, std::size_t trials, std::uint64_t seed) {
  if (n < 2 || trials == 0) throw ShapeError("cycle_monte_carlo needs n >= 2 and trials > 0");
  std::mt19937_64 rng(seed);
  const std::size_t N = 2 * n;
  std::size_t hits_two = 0, hits_one = 0;
  std::vector<std::size_t> perm(N), idx(N);
  auto draw = [&](bool two) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::pair<std::size_t, std::size_t>> e;
    if (two) {
      for (std::size_t i = 0; i < n; ++i) e.push_back({perm[i], perm[(i + 1) % n]});
      for (std::size_t i = 0; i < n; ++i) e.push_back({perm[n + i], perm[n + (i + 1) % n]});
    } else {
      for (std::size_t i = 0; i < N; ++i) e.push_back({perm[i], perm[(i + 1) % N]});
    }
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::pair<std::size_t, std::size_t>> pick;
    for (std::size_t i = 0; i < n; ++i) pick.push_back(e[idx[i]]);
    return classify_edges(pick);
  };
  for (std::size_t t = 0; t < trials; ++t) {
    hits_two += draw(true) == EdgeShape::cycle;
    hits_one += draw(false) == EdgeShape::open_path;
  }
  CycleMonteCarlo r;
  r.trials = trials;
  const double T = static_cast<double>(trials);
  r.p_cycle_two = static_cast<double>(hits_two) / T;
  r.p_path_one = static_cast<double>(hits_one) / T;
  r.sum = r.p_cycle_two + r.p_path_one;
  r.stderr_sum = std::sqrt(r.p_cycle_two * (1 - r.p_cycle_two) / T + r.p_path_one * (1 - r.p_path_one) / T);
  return r;
}

}  // namespace scratchlab::globality
