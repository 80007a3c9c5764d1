#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace rstre {

using VertexId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr std::uint32_t kNone = 0xffffffffU;

/// Stored orientation: tail = e⁻ is the lower endpoint, head = e⁺ the higher.
struct Edge {
  VertexId tail;
  VertexId head;

  VertexId other(VertexId x) const noexcept { return x == tail ? head : tail; }
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Incidence {
  EdgeId edge;
  VertexId other;
};

class MultiGraph {
 public:
  MultiGraph() = default;

  MultiGraph(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    require(n <= kNone, ErrorKind::InvalidArgument, "vertex count overflows VertexId");
    for (auto& e : edges_) {
      require(e.tail < n && e.head < n, ErrorKind::InvalidArgument,
              "edge endpoint out of range");
      require(e.tail != e.head, ErrorKind::InvalidArgument, "self-loops are not stored");
      if (e.tail > e.head) std::swap(e.tail, e.head);
    }
    build_adjacency();
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return edges_.size(); }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::span<const Incidence> incident(VertexId v) const {
    return {adj_.data() + offset_[v], adj_.data() + offset_[v + 1]};
  }
  std::size_t degree(VertexId v) const { return offset_[v + 1] - offset_[v]; }

  bool connected() const;

 private:
  void build_adjacency() {
    offset_.assign(n_ + 1, 0);
    for (const auto& e : edges_) {
      ++offset_[e.tail + 1];
      ++offset_[e.head + 1];
    }
    std::partial_sum(offset_.begin(), offset_.end(), offset_.begin());
    adj_.resize(2 * edges_.size());
    std::vector<std::size_t> fill(offset_.begin(), offset_.end() - 1);
    for (EdgeId id = 0; id < edges_.size(); ++id) {
      const auto& e = edges_[id];
      adj_[fill[e.tail]++] = {id, e.head};
      adj_[fill[e.head]++] = {id, e.tail};
    }
  }

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offset_{0};
  std::vector<Incidence> adj_;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0U);
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

  std::size_t size_of(std::uint32_t x) { return size_[find(x)]; }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::size_t> size_;
};

struct ComponentCensus {
  std::vector<std::uint32_t> component;  // vertex -> component id, 0 = largest
  std::vector<std::size_t> sizes;        // decreasing

  std::size_t count() const noexcept { return sizes.size(); }
};

/// Components ordered by decreasing size, ties by smallest contained vertex.
inline ComponentCensus connected_components(const MultiGraph& g) {
  const std::size_t n = g.n();
  DisjointSets ds(n);
  for (const auto& e : g.edges()) ds.unite(e.tail, e.head);
  std::vector<std::uint32_t> first_id(n, kNone);
  std::vector<std::pair<std::size_t, VertexId>> keys;  // (size, smallest vertex)
  std::vector<std::uint32_t> raw(n);
  for (VertexId v = 0; v < n; ++v) {
    auto r = ds.find(v);
    if (first_id[r] == kNone) {
      first_id[r] = static_cast<std::uint32_t>(keys.size());
      keys.emplace_back(ds.size_of(r), v);
    }
    raw[v] = first_id[r];
  }
  std::vector<std::uint32_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0U);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (keys[a].first != keys[b].first) return keys[a].first > keys[b].first;
    return keys[a].second < keys[b].second;
  });
  std::vector<std::uint32_t> rank(keys.size());
  ComponentCensus census;
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    rank[order[i]] = i;
    census.sizes.push_back(keys[order[i]].first);
  }
  census.component.resize(n);
  for (VertexId v = 0; v < n; ++v) census.component[v] = rank[raw[v]];
  return census;
}

inline bool MultiGraph::connected() const {
  return n_ <= 1 || connected_components(*this).count() == 1;
}

// ---------------------------------------------------------------- builders

inline MultiGraph build_complete(std::size_t n) {
  require(n >= 1, ErrorKind::InvalidArgument, "complete graph needs n >= 1");
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (VertexId u = 0; u < n; ++u)
    for (VertexId v = u + 1; v < n; ++v) edges.push_back({u, v});
  return MultiGraph(n, std::move(edges));
}

/// Edge id of (u, v), u < v, in build_complete(n).
inline constexpr std::uint64_t complete_edge_id(std::uint64_t n, std::uint64_t u,
                                                std::uint64_t v) noexcept {
  if (u > v) std::swap(u, v);
  return u * (2 * n - u - 1) / 2 + (v - u - 1);
}

struct BoxShape {
  std::size_t side = 1;
  std::size_t dim = 1;

  std::size_t volume() const {
    std::size_t vol = 1;
    for (std::size_t i = 0; i < dim; ++i) vol *= side;
    return vol;
  }
  std::vector<std::size_t> coords(std::size_t index) const {
    std::vector<std::size_t> x(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = index % side;
      index /= side;
    }
    return x;
  }
  std::size_t index(const std::vector<std::size_t>& x) const {
    std::size_t id = 0;
    for (std::size_t i = dim; i-- > 0;) id = id * side + x[i];
    return id;
  }
  bool on_boundary(std::size_t index) const {
    for (auto c : coords(index))
      if (c == 0 || c + 1 == side) return true;
    return false;
  }
};

/// Box [-L, L]^d of Z^d; vertex index is the base-(2L+1) encoding of the
/// shifted coordinates, first coordinate least significant.
inline MultiGraph build_box(std::size_t L, std::size_t d, bool torus = false) {
  require(d >= 1, ErrorKind::InvalidArgument, "dimension must be >= 1");
  const std::size_t side = 2 * L + 1;
  std::size_t vol = 1;
  for (std::size_t i = 0; i < d; ++i) {
    require(vol <= (std::size_t{1} << 31) / side, ErrorKind::InvalidArgument,
            "box vertex count overflows");
    vol *= side;
  }
  std::vector<Edge> edges;
  std::size_t stride = 1;
  for (std::size_t axis = 0; axis < d; ++axis) {
    for (std::size_t v = 0; v < vol; ++v) {
      std::size_t c = (v / stride) % side;
      if (c + 1 < side) {
        edges.push_back({static_cast<VertexId>(v), static_cast<VertexId>(v + stride)});
      } else if (torus && side > 2) {
        edges.push_back({static_cast<VertexId>(v - c * stride), static_cast<VertexId>(v)});
      }
    }
    stride *= side;
  }
  return MultiGraph(vol, std::move(edges));
}

/// Simple d-regular graph by the configuration model, rejecting pairings with
/// loops or multi-edges.
inline MultiGraph build_random_regular(std::size_t n, std::size_t d, std::uint64_t seed,
                                       std::size_t max_attempts = 10000) {
  require((n * d) % 2 == 0, ErrorKind::InvalidArgument, "n*d must be even");
  require(d < n, ErrorKind::InvalidArgument, "degree must be below n");
  RngStream rng(seed, "random-regular");
  std::vector<VertexId> stubs(n * d);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    for (std::size_t i = 0; i < stubs.size(); ++i) stubs[i] = static_cast<VertexId>(i / d);
    for (std::size_t i = stubs.size(); i > 1; --i) std::swap(stubs[i - 1], stubs[rng.below(i)]);
    std::unordered_set<std::uint64_t> seen;
    std::vector<Edge> edges;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < stubs.size() && ok; i += 2) {
      VertexId a = std::min(stubs[i], stubs[i + 1]), b = std::max(stubs[i], stubs[i + 1]);
      ok = a != b && seen.insert((std::uint64_t{a} << 32) | b).second;
      edges.push_back({a, b});
    }
    if (ok) return MultiGraph(n, std::move(edges));
  }
  fail(ErrorKind::RetryExhausted, "configuration model kept producing loops or multi-edges");
}

struct EdgeListData {
  MultiGraph graph;
  std::optional<std::vector<double>> omega;
};

/// Edge-list text: first data line n, then "u v" or "u v omega" with u < v < n.
/// '#' starts a comment. Either all edges carry omega or none does.
inline EdgeListData parse_edge_list(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> n;
  std::vector<Edge> edges;
  std::vector<double> omega;
  std::optional<bool> has_omega;
  auto parse_fail = [&](const std::string& what) {
    fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto as_index = [&](const std::string& s) -> std::size_t {
      std::size_t pos = 0;
      unsigned long long v = 0;
      try {
        if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
        v = std::stoull(s, &pos);
      } catch (const std::exception&) {
        parse_fail("expected a non-negative integer, got '" + s + "'");
      }
      if (pos != s.size()) parse_fail("expected a non-negative integer, got '" + s + "'");
      return static_cast<std::size_t>(v);
    };
    if (!n) {
      if (tok.size() != 1) parse_fail("first line must hold the vertex count");
      n = as_index(tok[0]);
      continue;
    }
    if (tok.size() != 2 && tok.size() != 3) parse_fail("expected 'u v' or 'u v omega'");
    std::size_t u = as_index(tok[0]), v = as_index(tok[1]);
    if (u == v) parse_fail("self-loop " + tok[0] + " " + tok[1]);
    if (u >= *n || v >= *n) parse_fail("vertex out of range");
    if (u > v) parse_fail("endpoints must satisfy u < v");
    bool row_omega = tok.size() == 3;
    if (has_omega && *has_omega != row_omega) parse_fail("omega column present on some rows only");
    has_omega = row_omega;
    if (row_omega) {
      std::size_t pos = 0;
      double w = 0;
      try {
        w = std::stod(tok[2], &pos);
      } catch (const std::exception&) {
        parse_fail("bad omega '" + tok[2] + "'");
      }
      if (pos != tok[2].size() || !std::isfinite(w)) parse_fail("bad omega '" + tok[2] + "'");
      omega.push_back(w);
    }
    edges.push_back({static_cast<VertexId>(u), static_cast<VertexId>(v)});
  }
  if (!n) fail(ErrorKind::Parse, "missing vertex count");
  EdgeListData out{MultiGraph(*n, std::move(edges)), std::nullopt};
  if (has_omega.value_or(false)) out.omega = std::move(omega);
  return out;
}

inline EdgeListData parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  return parse_edge_list(in);
}

inline EdgeListData read_edge_list(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  return parse_edge_list(in);
}

inline void write_edge_list(std::ostream& out, const MultiGraph& g,
                            const std::vector<double>* omega = nullptr) {
  out << g.n() << '\n';
  out.precision(17);
  for (EdgeId e = 0; e < g.m(); ++e) {
    out << g.edge(e).tail << ' ' << g.edge(e).head;
    if (omega) out << ' ' << (*omega)[e];
    out << '\n';
  }
}

// ------------------------------------------------- contraction and deletion

struct ContractResult {
  MultiGraph graph;
  std::vector<VertexId> vertex_map;  // old vertex -> new vertex
  std::vector<EdgeId> edge_map;      // old edge -> new edge, kNone if contracted or looped
};

/// Merges the endpoints of every edge in `contract`; self-loops created are
/// dropped, parallel edges survive. New vertices are numbered by their
/// smallest old member, surviving edges keep their relative order.
inline ContractResult contract_edges(const MultiGraph& g, std::span<const EdgeId> contract) {
  DisjointSets ds(g.n());
  for (EdgeId e : contract) {
    require(e < g.m(), ErrorKind::InvalidArgument, "unknown edge id");
    ds.unite(g.edge(e).tail, g.edge(e).head);
  }
  ContractResult r;
  r.vertex_map.assign(g.n(), kNone);
  std::vector<VertexId> root_label(g.n(), kNone);
  VertexId next = 0;
  for (VertexId v = 0; v < g.n(); ++v) {
    auto root = ds.find(v);
    if (root_label[root] == kNone) root_label[root] = next++;
    r.vertex_map[v] = root_label[root];
  }
  std::vector<Edge> edges;
  r.edge_map.assign(g.m(), kNone);
  for (EdgeId e = 0; e < g.m(); ++e) {
    VertexId a = r.vertex_map[g.edge(e).tail], b = r.vertex_map[g.edge(e).head];
    if (a == b) continue;
    r.edge_map[e] = static_cast<EdgeId>(edges.size());
    edges.push_back({a, b});
  }
  r.graph = MultiGraph(next, std::move(edges));
  return r;
}

struct DeleteResult {
  MultiGraph graph;
  std::vector<EdgeId> edge_map;  // old edge -> new edge, kNone if deleted
};

inline DeleteResult delete_edges(const MultiGraph& g, std::span<const EdgeId> remove) {
  std::vector<char> gone(g.m(), 0);
  for (EdgeId e : remove) {
    require(e < g.m(), ErrorKind::InvalidArgument, "unknown edge id");
    gone[e] = 1;
  }
  DeleteResult r;
  r.edge_map.assign(g.m(), kNone);
  std::vector<Edge> edges;
  for (EdgeId e = 0; e < g.m(); ++e) {
    if (gone[e]) continue;
    r.edge_map[e] = static_cast<EdgeId>(edges.size());
    edges.push_back(g.edge(e));
  }
  r.graph = MultiGraph(g.n(), std::move(edges));
  return r;
}

/// Subgraph on all vertices keeping the listed edges (in the given order).
inline MultiGraph edge_subgraph(const MultiGraph& g, std::span<const EdgeId> keep) {
  std::vector<Edge> edges;
  edges.reserve(keep.size());
  for (EdgeId e : keep) edges.push_back(g.edge(e));
  return MultiGraph(g.n(), std::move(edges));
}

struct InducedSubgraph {
  MultiGraph graph;
  std::vector<VertexId> vertices;  // new -> old
  std::vector<EdgeId> edges;       // new -> old
};

inline InducedSubgraph induced_subgraph(const MultiGraph& g, std::span<const VertexId> vertices) {
  InducedSubgraph s;
  s.vertices.assign(vertices.begin(), vertices.end());
  std::sort(s.vertices.begin(), s.vertices.end());
  std::vector<VertexId> local(g.n(), kNone);
  for (VertexId i = 0; i < s.vertices.size(); ++i) local[s.vertices[i]] = i;
  std::vector<Edge> edges;
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto a = local[g.edge(e).tail], b = local[g.edge(e).head];
    if (a == kNone || b == kNone) continue;
    s.edges.push_back(e);
    edges.push_back({a, b});
  }
  s.graph = MultiGraph(s.vertices.size(), std::move(edges));
  return s;
}

// ------------------------------------------------------------------- trees

/// Edge set of a spanning tree of a parent graph, sorted by id.
struct SpanningTree {
  std::vector<EdgeId> edges;

  friend bool operator==(const SpanningTree&, const SpanningTree&) = default;
  friend auto operator<=>(const SpanningTree&, const SpanningTree&) = default;
};

inline bool is_spanning_tree(const MultiGraph& g, std::span<const EdgeId> edges) {
  if (g.n() == 0 || edges.size() + 1 != g.n()) return false;
  DisjointSets ds(g.n());
  for (EdgeId e : edges) {
    if (e >= g.m() || !ds.unite(g.edge(e).tail, g.edge(e).head)) return false;
  }
  return true;
}

inline SpanningTree make_spanning_tree(const MultiGraph& g, std::vector<EdgeId> edges) {
  std::sort(edges.begin(), edges.end());
  require(is_spanning_tree(g, edges), ErrorKind::InvalidArgument, "not a spanning tree");
  return SpanningTree{std::move(edges)};
}

struct RootedTree {
  MultiGraph tree;
  VertexId root = 0;
};

/// Hop distances from `source`; unreachable vertices get kNone.
inline std::vector<std::uint32_t> bfs_distances(const MultiGraph& g, VertexId source) {
  std::vector<std::uint32_t> dist(g.n(), kNone);
  std::vector<VertexId> queue{source};
  dist[source] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    VertexId x = queue[head];
    for (const auto& inc : g.incident(x)) {
      if (dist[inc.other] == kNone) {
        dist[inc.other] = dist[x] + 1;
        queue.push_back(inc.other);
      }
    }
  }
  return dist;
}

inline bool is_forest(const MultiGraph& g) {
  DisjointSets ds(g.n());
  for (const auto& e : g.edges())
    if (!ds.unite(e.tail, e.head)) return false;
  return true;
}

namespace detail {
inline std::pair<VertexId, std::uint32_t> farthest(const MultiGraph& t, VertexId s) {
  auto dist = bfs_distances(t, s);
  VertexId best = s;
  for (VertexId v = 0; v < t.n(); ++v)
    if (dist[v] != kNone && dist[v] > dist[best]) best = v;
  return {best, dist[best]};
}
}  // namespace detail

/// Longest path length (in edges) of a tree, by double BFS.
inline std::uint32_t tree_diameter(const MultiGraph& t) {
  require(is_forest(t), ErrorKind::InvalidArgument, "tree_diameter input has a cycle");
  require(t.n() == 0 || t.m() + 1 == t.n(), ErrorKind::InvalidArgument,
          "tree_diameter input is not connected");
  if (t.n() == 0) return 0;
  auto [far, d0] = detail::farthest(t, 0);
  (void)d0;
  return detail::farthest(t, far).second;
}

inline std::uint32_t tree_diameter(const MultiGraph& g, const SpanningTree& t) {
  return tree_diameter(edge_subgraph(g, t.edges));
}

/// Diameter of each component of a forest, listed by component id of
/// connected_components (largest component first).
inline std::vector<std::uint32_t> forest_diameters(const MultiGraph& f) {
  require(is_forest(f), ErrorKind::InvalidArgument, "forest_diameters input has a cycle");
  auto census = connected_components(f);
  std::vector<std::uint32_t> diam(census.count(), 0);
  std::vector<char> done(census.count(), 0);
  for (VertexId v = 0; v < f.n(); ++v) {
    auto c = census.component[v];
    if (done[c]) continue;
    done[c] = 1;
    auto [far, d0] = detail::farthest(f, v);
    (void)d0;
    diam[c] = detail::farthest(f, far).second;
  }
  return diam;
}

/// Minimal subtree of the tree (given as edge ids of g) spanning the vertex
/// set A: an edge is kept iff it separates two members of A.
inline std::vector<EdgeId> restricted_subtree(const MultiGraph& g, std::span<const EdgeId> tree,
                                              std::span<const VertexId> A) {
  require(!A.empty(), ErrorKind::InvalidArgument, "restricted_subtree needs a nonempty set");
  auto t = edge_subgraph(g, tree);
  require(is_forest(t), ErrorKind::InvalidArgument, "restricted_subtree input has a cycle");
  std::vector<std::uint32_t> inA(g.n(), 0);
  for (VertexId a : A) {
    require(a < g.n(), ErrorKind::InvalidArgument, "vertex out of range");
    inA[a] = 1;
  }
  std::size_t total = 0;
  for (auto x : inA) total += x;
  // Iterative DFS from A[0], recording parent edges in visit order.
  std::vector<EdgeId> parent_edge(g.n(), kNone);
  std::vector<char> seen(g.n(), 0);
  std::vector<VertexId> order{A[0]};
  seen[A[0]] = 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (const auto& inc : t.incident(order[i])) {
      if (seen[inc.other]) continue;
      seen[inc.other] = 1;
      parent_edge[inc.other] = inc.edge;
      order.push_back(inc.other);
    }
  }
  for (VertexId a : A)
    require(seen[a], ErrorKind::InvalidArgument, "set is not inside one tree component");
  std::vector<std::size_t> below(g.n(), 0);
  std::vector<EdgeId> out;
  for (std::size_t i = order.size(); i-- > 1;) {
    VertexId v = order[i];
    below[v] += inA[v];
    EdgeId pe = parent_edge[v];
    below[t.edge(pe).other(v)] += below[v];
    if (below[v] > 0 && below[v] < total) out.push_back(tree[pe]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rstre
