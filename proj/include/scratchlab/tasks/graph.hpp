#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <string_view>
#include <unordered_map>
#include <string>
#include <utility>
#include <vector>

#include "scratchlab/errors.hpp"
#include "scratchlab/tasks/tokens.hpp"

namespace scratchlab::tasks {

enum class GraphKind { cycle, three_cycle, random_graph, ood_uneven, ood_i, mixed, parsed };

inline const char* kind_name(GraphKind k) {
  switch (k) {
    case GraphKind::cycle: return "cycle";
    case GraphKind::three_cycle: return "three_cycle";
    case GraphKind::random_graph: return "random_graph";
    case GraphKind::ood_uneven: return "ood_uneven";
    case GraphKind::ood_i: return "ood_i";
    case GraphKind::mixed: return "mixed";
    case GraphKind::parsed: return "parsed";
  }
  return "?";
}

/// Directed graph over named nodes. Edges and query refer to node indices.
struct GraphInstance {
  std::vector<std::string> nodes;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> query;  // source, destination (and a third vertex for the three-cycle task)
  int label = 0;
  GraphKind kind = GraphKind::parsed;
  int n = 0;
  int distance = -1;  // directed query distance, -1 when unreachable
};

/// Same edges (in order) and query, compared by node name.
inline bool same_graph(const GraphInstance& a, const GraphInstance& b) {
  if (a.edges.size() != b.edges.size() || a.query.size() != b.query.size()) return false;
  for (std::size_t i = 0; i < a.edges.size(); ++i) {
    if (a.nodes[a.edges[i].first] != b.nodes[b.edges[i].first]) return false;
    if (a.nodes[a.edges[i].second] != b.nodes[b.edges[i].second]) return false;
  }
  for (std::size_t i = 0; i < a.query.size(); ++i) {
    if (a.nodes[a.query[i]] != b.nodes[b.query[i]]) return false;
  }
  return true;
}

// ---------------------------------------------------------------- oracles

inline std::vector<std::vector<int>> adjacency(const GraphInstance& g) {
  std::vector<std::vector<int>> adj(g.nodes.size());
  for (auto [u, v] : g.edges) adj[u].push_back(v);
  return adj;
}

/// Directed BFS distance from `s` to `t`, -1 when unreachable.
inline int bfs_distance(const GraphInstance& g, int s, int t) {
  const auto adj = adjacency(g);
  std::vector<int> dist(g.nodes.size(), -1);
  std::queue<int> q;
  dist[s] = 0;
  q.push(s);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    if (u == t) return dist[u];
    for (int v : adj[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  return -1;
}

inline int distance_oracle(const GraphInstance& g) {
  if (g.query.size() < 2) throw ShapeError("graph has no query pair");
  return bfs_distance(g, g.query[0], g.query[1]);
}

/// 1 iff the destination is reachable from the source. For the three-vertex
/// query, 1 iff all three query vertices are mutually reachable.
inline int connectivity_oracle(const GraphInstance& g) {
  if (g.query.size() < 2) throw ShapeError("graph has no query pair");
  for (std::size_t i = 0; i + 1 < g.query.size(); ++i) {
    if (bfs_distance(g, g.query[i], g.query[i + 1]) < 0) return 0;
  }
  if (g.query.size() > 2 && bfs_distance(g, g.query.back(), g.query.front()) < 0) return 0;
  return 1;
}

/// Weakly connected component id per node.
inline std::vector<int> weak_components(std::size_t n_nodes, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> parent(n_nodes);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [u, v] : edges) parent[find(u)] = find(v);
  std::vector<int> comp(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) comp[i] = find(static_cast<int>(i));
  return comp;
}

/// 0 iff the source has no outgoing edge or the destination no incoming edge.
inline int degree_shortcut(const GraphInstance& g) {
  const int s = g.query.at(0), t = g.query.at(1);
  bool out = false, in = false;
  for (auto [u, v] : g.edges) {
    out = out || u == s;
    in = in || v == t;
  }
  return out && in ? 1 : 0;
}

// ---------------------------------------------------------- serialization

/// "u>v;" per edge in stored order, then "s?t;". The three-vertex query is
/// rendered "a?b?c" with no terminator.
inline Tokens serialize_graph(const GraphInstance& g) {
  Tokens t;
  t.reserve(g.edges.size() * 4 + 6);
  for (auto [u, v] : g.edges) {
    t.push_back(g.nodes[u]);
    t.push_back(">");
    t.push_back(g.nodes[v]);
    t.push_back(";");
  }
  for (std::size_t i = 0; i < g.query.size(); ++i) {
    if (i) t.push_back("?");
    t.push_back(g.nodes[g.query[i]]);
  }
  if (g.query.size() == 2) t.push_back(";");
  return t;
}

/// Inverse of serialize_graph on rendered text. Node names are maximal runs
/// of characters other than '>', ';' and '?'. Label is set by the oracle.
inline GraphInstance parse_graph(std::string_view text) {
  GraphInstance g;
  std::unordered_map<std::string, int> ids;
  auto node = [&](std::string_view name) {
    if (name.empty()) throw FormatError("empty node name in graph text");
    auto [it, fresh] = ids.emplace(std::string(name), static_cast<int>(g.nodes.size()));
    if (fresh) g.nodes.emplace_back(name);
    return it->second;
  };
  bool have_query = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(';', pos);
    std::string_view item = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    if (item.empty()) continue;
    if (have_query) throw FormatError("graph text continues after the query");
    if (const auto gt = item.find('>'); gt != std::string_view::npos) {
      g.edges.emplace_back(node(item.substr(0, gt)), node(item.substr(gt + 1)));
    } else if (item.find('?') != std::string_view::npos) {
      std::size_t p = 0;
      while (true) {
        const auto q = item.find('?', p);
        g.query.push_back(node(item.substr(p, q == std::string_view::npos ? std::string_view::npos : q - p)));
        if (q == std::string_view::npos) break;
        p = q + 1;
      }
      have_query = true;
    } else {
      throw FormatError("graph item '" + std::string(item) + "' is neither an edge nor a query");
    }
  }
  if (!have_query || g.query.size() < 2) throw FormatError("graph text has no query");
  g.label = connectivity_oracle(g);
  g.distance = g.query.size() == 2 ? distance_oracle(g) : -1;
  return g;
}

// ------------------------------------------------------------- generators

namespace detail {

/// `k` distinct names from the node pool, in random order.
inline std::vector<std::string> draw_names(Rng& rng, std::size_t k) {
  if (k > kNodePool) {
    throw ConfigError("need " + std::to_string(k) + " node names but the pool has " + std::to_string(kNodePool));
  }
  std::vector<int> pool(kNodePool);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(i), kNodePool - 1));
    std::swap(pool[i], pool[j]);
    out.push_back(node_name(pool[i]));
  }
  return out;
}

/// Adds a directed cycle over nodes [first, first + len).
inline void add_cycle(GraphInstance& g, int first, int len) {
  for (int i = 0; i < len; ++i) g.edges.emplace_back(first + i, first + (i + 1) % len);
}

inline int draw_label(Rng& rng, std::optional<int> label) {
  if (label) {
    if (*label != 0 && *label != 1) throw ConfigError("label must be 0 or 1");
    return *label;
  }
  return static_cast<int>(uniform_int(rng, 0, 1));
}

inline void finish(GraphInstance& g, Rng& rng) {
  std::shuffle(g.edges.begin(), g.edges.end(), rng);
  g.distance = distance_oracle(g);
}

}  // namespace detail

/// Cycle task: one directed 2n-cycle with the query at directed distance n
/// (label 1), or two disjoint directed n-cycles with one query vertex in
/// each (label 0). Node names are drawn from the pool; edges are shuffled.
inline GraphInstance gen_cycle(int n, std::optional<int> label, std::uint64_t seed) {
  if (n < 2) throw ConfigError("cycle task needs n >= 2");
  if (2 * static_cast<std::size_t>(n) > kNodePool) throw ConfigError("cycle size exceeds the node-name pool");
  Rng rng(seed);
  GraphInstance g;
  g.kind = GraphKind::cycle;
  g.n = n;
  g.label = detail::draw_label(rng, label);
  g.nodes = detail::draw_names(rng, 2 * n);
  if (g.label == 1) {
    detail::add_cycle(g, 0, 2 * n);
  } else {
    detail::add_cycle(g, 0, n);
    detail::add_cycle(g, n, n);
  }
  g.query = {0, n};
  detail::finish(g, rng);
  return g;
}

/// Three-cycle task. Level i holds a_i, b_i, c_i; block i maps level i to
/// level i+1 (indices mod n) by a permutation. Blocks 0..n-2 are uniform
/// over S3; the last block is chosen so that the overall permutation is
/// uniform over A3, giving one 3n-cycle with probability 2/3 (label 1) and
/// three n-cycles otherwise. Edges are listed block by block, sources in
/// a, b, c order; the query is a_0?b_0?c_0.
inline GraphInstance gen_three_cycle(int n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("three-cycle task needs n >= 2");
  Rng rng(seed);
  using Perm = std::array<int, 3>;
  static const std::array<Perm, 6> s3{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  static const std::array<Perm, 3> a3{{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}}};
  std::vector<Perm> blocks;
  Perm total{0, 1, 2};  // letter at level 0 -> letter reached at the current level
  for (int i = 0; i + 1 < n; ++i) {
    const Perm& p = s3[uniform_int(rng, 0, 5)];
    blocks.push_back(p);
    for (auto& x : total) x = p[x];
  }
  const Perm& target = a3[uniform_int(rng, 0, 2)];
  Perm last{};
  for (int j = 0; j < 3; ++j) last[total[j]] = target[j];
  blocks.push_back(last);

  GraphInstance g;
  g.kind = GraphKind::three_cycle;
  g.n = n;
  static const char letters[3] = {'a', 'b', 'c'};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) g.nodes.push_back(std::string(1, letters[j]) + "_" + std::to_string(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) g.edges.emplace_back(3 * i + j, 3 * ((i + 1) % n) + blocks[i][j]);
  g.query = {0, 1, 2};
  g.label = target == a3[0] ? 0 : 1;
  return g;
}

/// How label-0 query pairs of the random-graph task are chosen.
enum class NegativeRule {
  unreachable,      // no directed path from source to destination
  weak_component,   // different weakly connected components
};

/// Random directed graph with `n_nodes` nodes and `n_edges` distinct
/// non-loop edges. Label 0 (probability 1/2): a pair chosen by `negatives`.
/// Label 1: directed distance d, d uniform in {1,2,3,4}. The graph is
/// resampled until such a pair exists.
inline GraphInstance gen_random_graph(int n_nodes, int n_edges, std::uint64_t seed, int retry_cap = 1000,
                                      NegativeRule negatives = NegativeRule::unreachable) {
  if (n_nodes < 2) throw ConfigError("random graph needs at least 2 nodes");
  if (n_edges < 0 || static_cast<std::int64_t>(n_edges) > static_cast<std::int64_t>(n_nodes) * (n_nodes - 1)) {
    throw ConfigError("too many edges for a simple directed graph");
  }
  Rng rng(seed);
  GraphInstance g;
  g.kind = GraphKind::random_graph;
  g.n = n_nodes;
  g.label = static_cast<int>(uniform_int(rng, 0, 1));
  const int want_d = g.label ? static_cast<int>(uniform_int(rng, 1, 4)) : -1;
  g.nodes = detail::draw_names(rng, n_nodes);
  std::vector<std::pair<int, int>> all;
  for (int u = 0; u < n_nodes; ++u)
    for (int v = 0; v < n_nodes; ++v)
      if (u != v) all.emplace_back(u, v);

  for (int attempt = 0; attempt < retry_cap; ++attempt) {
    // Partial Fisher-Yates: first n_edges entries form a uniform edge set in random order.
    for (int i = 0; i < n_edges; ++i) {
      const auto j = uniform_int(rng, i, static_cast<std::int64_t>(all.size()) - 1);
      std::swap(all[i], all[j]);
    }
    g.edges.assign(all.begin(), all.begin() + n_edges);
    std::vector<std::pair<int, int>> candidates;
    if (g.label == 0 && negatives == NegativeRule::weak_component) {
      const auto comp = weak_components(n_nodes, g.edges);
      for (int s = 0; s < n_nodes; ++s)
        for (int t = 0; t < n_nodes; ++t)
          if (comp[s] != comp[t]) candidates.emplace_back(s, t);
    } else {
      const auto adj = adjacency(g);
      for (int s = 0; s < n_nodes; ++s) {
        std::vector<int> dist(n_nodes, -1);
        std::queue<int> q;
        dist[s] = 0;
        q.push(s);
        while (!q.empty()) {
          const int u = q.front();
          q.pop();
          if (g.label && dist[u] == want_d) continue;
          for (int v : adj[u])
            if (dist[v] < 0) {
              dist[v] = dist[u] + 1;
              q.push(v);
            }
        }
        for (int t = 0; t < n_nodes; ++t) {
          if (g.label ? dist[t] == want_d : (t != s && dist[t] < 0)) candidates.emplace_back(s, t);
        }
      }
    }
    if (candidates.empty()) continue;
    const auto [s, t] = candidates[uniform_int(rng, 0, static_cast<std::int64_t>(candidates.size()) - 1)];
    g.query = {s, t};
    g.distance = distance_oracle(g);
    return g;
  }
  throw ConfigError("random graph: no suitable query pair after " + std::to_string(retry_cap) + " resamples");
}

/// Uneven training distribution: 24 nodes; label 0 is a 6-cycle plus an
/// 18-cycle with the source in the 6-cycle, label 1 is a 24-cycle with the
/// query at distance 6.
inline GraphInstance gen_ood_uneven(std::uint64_t seed, int total = 24, int short_len = 6,
                                    std::optional<int> label = std::nullopt) {
  if (short_len < 2 || total - short_len < 2 || short_len >= total) {
    throw ConfigError("uneven cycle variant needs 2 <= short < total - 1");
  }
  Rng rng(seed);
  GraphInstance g;
  g.kind = GraphKind::ood_uneven;
  g.n = short_len;
  g.label = detail::draw_label(rng, label);
  g.nodes = detail::draw_names(rng, total);
  if (g.label == 1) {
    detail::add_cycle(g, 0, total);
    g.query = {0, short_len};
  } else {
    detail::add_cycle(g, 0, short_len);
    detail::add_cycle(g, short_len, total - short_len);
    g.query = {0, static_cast<int>(uniform_int(rng, short_len, total - 1))};
  }
  detail::finish(g, rng);
  return g;
}

/// OOD-i distribution over `total` nodes: label 1 puts the query in a
/// 2i-cycle at distance i, label 0 in two disjoint i-cycles. The remaining
/// nodes form cycles of size 2i, the last one absorbing any remainder.
inline GraphInstance gen_ood_i(int i, std::uint64_t seed, int total = 24, std::optional<int> label = std::nullopt) {
  if (i < 2 || 2 * i > total) throw ConfigError("OOD-i needs 2 <= i <= total/2");
  Rng rng(seed);
  GraphInstance g;
  g.kind = GraphKind::ood_i;
  g.n = i;
  g.label = detail::draw_label(rng, label);
  g.nodes = detail::draw_names(rng, total);
  if (g.label == 1) {
    detail::add_cycle(g, 0, 2 * i);
  } else {
    detail::add_cycle(g, 0, i);
    detail::add_cycle(g, i, i);
  }
  g.query = {0, i};
  int first = 2 * i;
  while (first < total) {
    int len = std::min(2 * i, total - first);
    if (total - first - len == 1) len += 1;  // never leave a single node behind
    if (len < 2) throw ConfigError("OOD-i cannot place the remaining nodes in cycles");
    detail::add_cycle(g, first, len);
    first += len;
  }
  detail::finish(g, rng);
  return g;
}

/// Size uniform on {2..n_max}, then the cycle task at that size.
inline GraphInstance gen_mixed(int n_max, std::uint64_t seed) {
  if (n_max < 2) throw ConfigError("mixed distribution needs n_max >= 2");
  Rng rng(seed);
  const int n = static_cast<int>(uniform_int(rng, 2, n_max));
  GraphInstance g = gen_cycle(n, std::nullopt, rng());
  g.kind = GraphKind::mixed;
  return g;
}

/// Splits every token that is not a pool node name into characters, so
/// names such as "a_0" become model-vocabulary tokens.
inline Tokens model_tokens(const Tokens& t) {
  Tokens out;
  for (const auto& x : t) {
    const bool pool_name = x.size() > 1 && x[0] == 'v' &&
                           x.find_first_not_of("0123456789", 1) == std::string::npos;
    if (x.size() == 1 || pool_name) {
      out.push_back(x);
    } else {
      for (char c : x) out.emplace_back(1, c);
    }
  }
  return out;
}

/// Sample view of a labeled graph: question is the serialization, answer
/// the label digit.
inline Sample graph_sample(const GraphInstance& g, std::uint64_t seed) {
  Sample s;
  s.task = kind_name(g.kind);
  s.question = model_tokens(serialize_graph(g));
  s.answer = {std::to_string(g.label)};
  s.meta["n"] = g.n;
  s.meta["label"] = g.label;
  s.meta["distance"] = g.distance;
  s.meta["seed"] = static_cast<std::int64_t>(seed);
  return s;
}

}  // namespace scratchlab::tasks
