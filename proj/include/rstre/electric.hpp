#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "environment.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "linalg.hpp"

namespace rstre {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Vertex count up to which Laplacians are factored densely.
inline constexpr std::size_t kDenseLimit = 2000;

namespace detail {

inline Dense<Real> conductance_matrix(std::size_t n, const MultiGraph& g,
                                      std::span<const VertexId> vmap,
                                      const std::vector<Real>& w) {
  Dense<Real> c(n);
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto a = vmap[g.edge(e).tail], b = vmap[g.edge(e).head];
    if (a == b) continue;
    c(a, b) += w[e];
    c(b, a) += w[e];
  }
  return c;
}

inline std::vector<VertexId> identity_map(std::size_t n) {
  std::vector<VertexId> id(n);
  std::iota(id.begin(), id.end(), 0U);
  return id;
}

inline double to_double(Real x) {
  if (x > static_cast<Real>(std::numeric_limits<double>::max())) return kInfinity;
  return static_cast<double>(x);
}

/// Maps A to one node and B to another; remaining vertices keep their order.
struct MergedNodes {
  std::vector<VertexId> map;
  std::size_t count = 0;
  VertexId a = 0, b = 0;
};

inline MergedNodes merge_boundary(std::size_t n, std::span<const VertexId> A,
                                  std::span<const VertexId> B) {
  require(!A.empty() && !B.empty(), ErrorKind::InvalidArgument, "boundary sets must be nonempty");
  std::vector<int> tag(n, 0);
  for (auto v : A) {
    require(v < n, ErrorKind::InvalidArgument, "vertex out of range");
    tag[v] = 1;
  }
  for (auto v : B) {
    require(v < n, ErrorKind::InvalidArgument, "vertex out of range");
    require(tag[v] != 1, ErrorKind::InvalidArgument, "boundary sets must be disjoint");
    tag[v] = 2;
  }
  MergedNodes m;
  m.map.assign(n, kNone);
  VertexId next = 0;
  for (VertexId v = 0; v < n; ++v)
    if (tag[v] == 0) m.map[v] = next++;
  m.a = next++;
  m.b = next++;
  for (VertexId v = 0; v < n; ++v) {
    if (tag[v] == 1) m.map[v] = m.a;
    if (tag[v] == 2) m.map[v] = m.b;
  }
  m.count = next;
  return m;
}

inline SparseLaplacian sparse_laplacian(std::size_t n, const MultiGraph& g,
                                        std::span<const VertexId> vmap,
                                        const std::vector<Real>& w) {
  std::vector<std::map<std::uint32_t, double>> rows(n);
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto a = vmap[g.edge(e).tail], b = vmap[g.edge(e).head];
    if (a == b) continue;
    rows[a][b] += static_cast<double>(w[e]);
    rows[b][a] += static_cast<double>(w[e]);
  }
  SparseLaplacian lap;
  lap.n = n;
  lap.offset.assign(1, 0);
  lap.diag.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [j, c] : rows[i]) {
      lap.col.push_back(j);
      lap.val.push_back(c);
      lap.diag[i] += c;
    }
    lap.offset.push_back(lap.col.size());
  }
  return lap;
}

}  // namespace detail

/// R_eff(A <-> B); +infinity when no path joins A and B.
inline double effective_resistance(const WeightedGraphView& wg, std::span<const VertexId> A,
                                   std::span<const VertexId> B) {
  const auto& g = wg.graph();
  auto merged = detail::merge_boundary(g.n(), A, B);
  auto [w, log_scale] = wg.scaled_weights();
  DisjointSets ds(merged.count);
  for (const auto& e : g.edges()) ds.unite(merged.map[e.tail], merged.map[e.head]);
  if (ds.find(merged.a) != ds.find(merged.b)) return kInfinity;
  if (merged.count <= kDenseLimit) {
    auto c = detail::conductance_matrix(merged.count, g, merged.map, w);
    GroundedElimination elim(c, order_with_last(merged.count, merged.b, merged.a));
    Real pivot = elim.last_pivot();
    if (!(pivot > 0)) return kInfinity;
    return detail::to_double(std::exp(-log_scale) / pivot);
  }
  auto lap = detail::sparse_laplacian(merged.count, g, merged.map, w);
  std::vector<char> fixed(merged.count, 0);
  // Vertices outside the component of A and B are pinned; they carry no current.
  for (VertexId v = 0; v < merged.count; ++v)
    if (ds.find(v) != ds.find(merged.a)) fixed[v] = 1;
  fixed[merged.b] = 1;
  std::vector<double> rhs(merged.count, 0);
  rhs[merged.a] = 1;
  auto res = conjugate_gradient(lap, rhs, fixed, 1e-10);
  if (res.relative_residual > 1e-10)
    fail(ErrorKind::NumericalFailure,
         "conjugate gradients stalled at relative residual " + std::to_string(res.relative_residual));
  return detail::to_double(static_cast<Real>(res.x[merged.a]) * std::exp(-log_scale));
}

inline double effective_resistance(const WeightedGraphView& wg, VertexId u, VertexId v) {
  if (u == v) return 0;
  return effective_resistance(wg, std::span<const VertexId>(&u, 1), std::span<const VertexId>(&v, 1));
}

/// R_eff(v, ground) for every vertex v, from one elimination.
inline std::vector<double> resistance_to(const WeightedGraphView& wg, VertexId ground) {
  const auto& g = wg.graph();
  require(g.n() <= kDenseLimit, ErrorKind::TooLarge, "resistance_to is dense only");
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  auto [w, log_scale] = wg.scaled_weights();
  auto c = detail::conductance_matrix(g.n(), g, detail::identity_map(g.n()), w);
  GroundedElimination elim(c, order_with_last(g.n(), ground));
  auto diag = elim.inverse_diagonal();
  std::vector<double> out(g.n());
  Real unscale = std::exp(-log_scale);
  for (VertexId v = 0; v < g.n(); ++v) out[v] = detail::to_double(diag[v] * unscale);
  return out;
}

struct Voltages {
  std::vector<double> v;  // potential per vertex, B at 0, unit current out of A
  double resistance = 0;
};

/// Potentials of the unit current from A to B. Vertices not connected to A
/// and B get potential 0.
inline Voltages voltages(const WeightedGraphView& wg, std::span<const VertexId> A,
                         std::span<const VertexId> B) {
  const auto& g = wg.graph();
  auto merged = detail::merge_boundary(g.n(), A, B);
  require(merged.count <= kDenseLimit, ErrorKind::TooLarge, "voltages is dense only");
  auto [w, log_scale] = wg.scaled_weights();
  DisjointSets ds(merged.count);
  for (const auto& e : g.edges()) ds.unite(merged.map[e.tail], merged.map[e.head]);
  require(ds.find(merged.a) == ds.find(merged.b), ErrorKind::Disconnected,
          "A and B lie in different components");
  // Restrict to the component of A and B so the factorization is nonsingular.
  std::vector<VertexId> local(merged.count, kNone);
  std::size_t cnt = 0;
  for (VertexId x = 0; x < merged.count; ++x)
    if (ds.find(x) == ds.find(merged.a)) local[x] = static_cast<VertexId>(cnt++);
  std::vector<VertexId> vmap(g.n());
  for (VertexId v = 0; v < g.n(); ++v) vmap[v] = local[merged.map[v]];
  Dense<Real> c(cnt);
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto a = vmap[g.edge(e).tail], b = vmap[g.edge(e).head];
    if (a == kNone || a == b) continue;
    c(a, b) += w[e];
    c(b, a) += w[e];
  }
  GroundedElimination elim(c, order_with_last(cnt, local[merged.b], local[merged.a]));
  auto x = elim.unit_potentials(local[merged.a]);
  Real unscale = std::exp(-log_scale);
  Voltages out;
  out.v.assign(g.n(), 0);
  for (VertexId v = 0; v < g.n(); ++v)
    if (vmap[v] != kNone) out.v[v] = detail::to_double(x[vmap[v]] * unscale);
  out.resistance = detail::to_double(unscale / elim.last_pivot());
  return out;
}

/// Flow on each edge in its stored orientation (tail -> head).
struct Flow {
  std::vector<double> theta;
  VertexId source = 0;
  VertexId sink = 0;
  double strength = 0;

  /// Net flow out of x.
  double divergence(const MultiGraph& g, VertexId x) const {
    double s = 0;
    for (const auto& inc : g.incident(x)) {
      const auto& e = g.edge(inc.edge);
      s += e.tail == x ? theta[inc.edge] : -theta[inc.edge];
    }
    return s;
  }
};

inline Flow unit_current_flow(const WeightedGraphView& wg, VertexId u, VertexId v) {
  require(u != v, ErrorKind::InvalidArgument, "source and sink must differ");
  const auto& g = wg.graph();
  auto [w, log_scale] = wg.scaled_weights();
  (void)log_scale;
  // Potentials stay in scaled units; currents are invariant under the scaling.
  auto comp = connected_components(g);
  require(comp.component[u] == comp.component[v], ErrorKind::Disconnected,
          "source and sink lie in different components");
  std::vector<VertexId> local(g.n(), kNone);
  std::size_t cnt = 0;
  for (VertexId x = 0; x < g.n(); ++x)
    if (comp.component[x] == comp.component[u]) local[x] = static_cast<VertexId>(cnt++);
  Dense<Real> c(cnt);
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto p = local[g.edge(e).tail], q = local[g.edge(e).head];
    if (p == kNone) continue;
    c(p, q) += w[e];
    c(q, p) += w[e];
  }
  GroundedElimination elim(c, order_with_last(cnt, local[v], local[u]));
  auto x = elim.unit_potentials(local[u]);
  Flow f;
  f.source = u;
  f.sink = v;
  f.strength = 1;
  f.theta.assign(g.m(), 0);
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto p = local[g.edge(e).tail], q = local[g.edge(e).head];
    if (p == kNone) continue;
    f.theta[e] = static_cast<double>(w[e] * (x[p] - x[q]));
  }
  return f;
}

/// Sum over edges of theta(e)^2 / w(e).
inline double flow_energy(const Flow& theta, const WeightedGraphView& wg) {
  double s = 0;
  for (EdgeId e = 0; e < wg.m(); ++e)
    if (theta.theta[e] != 0) s += theta.theta[e] * theta.theta[e] * std::exp(-wg.log_weight(e));
  return s;
}

// --------------------------------------------------- series/parallel laws

struct ReductionStep {
  enum class Kind { Parallel, Series } kind;
  VertexId a = 0, b = 0;    // endpoints (original ids) of the resulting edge
  VertexId removed = kNone; // eliminated vertex for series steps
  double weight = 0;        // conductance of the resulting edge
};

struct ReducedNetwork {
  MultiGraph graph;
  std::vector<double> weight;        // conductance per reduced edge
  std::vector<VertexId> vertex_map;  // original -> reduced, kNone if eliminated
  std::vector<ReductionStep> log;

  WeightedGraphView view() const { return WeightedGraphView::from_weights(graph, weight); }
};

/// Merges parallel edges and splices out unprotected degree-2 vertices until
/// neither rule applies. Resistances between protected vertices are kept.
inline ReducedNetwork series_parallel_reduce(const WeightedGraphView& wg,
                                             std::span<const VertexId> protect = {}) {
  const auto& g = wg.graph();
  struct Live {
    VertexId a, b;
    Real w;
    bool alive;
  };
  std::vector<Live> edges;
  for (EdgeId e = 0; e < g.m(); ++e)
    edges.push_back({g.edge(e).tail, g.edge(e).head, static_cast<Real>(wg.weight(e)), true});
  std::vector<char> keep(g.n(), 0), gone(g.n(), 0);
  for (auto v : protect) keep[v] = 1;
  ReducedNetwork out;
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::pair<VertexId, VertexId>, std::size_t> first;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      auto& e = edges[i];
      if (!e.alive) continue;
      auto key = std::minmax(e.a, e.b);
      auto [it, fresh] = first.emplace(key, i);
      if (fresh) continue;
      auto& keepe = edges[it->second];
      keepe.w += e.w;
      e.alive = false;
      changed = true;
      out.log.push_back({ReductionStep::Kind::Parallel, key.first, key.second, kNone,
                         static_cast<double>(keepe.w)});
    }
    std::vector<std::vector<std::size_t>> inc(g.n());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (!edges[i].alive) continue;
      inc[edges[i].a].push_back(i);
      inc[edges[i].b].push_back(i);
    }
    for (VertexId v = 0; v < g.n(); ++v) {
      if (keep[v] || gone[v] || inc[v].size() != 2) continue;
      auto& e1 = edges[inc[v][0]];
      auto& e2 = edges[inc[v][1]];
      if (!e1.alive || !e2.alive) continue;
      VertexId x = e1.a == v ? e1.b : e1.a;
      VertexId y = e2.a == v ? e2.b : e2.a;
      if (x == y || x == v || y == v) continue;
      Real w = 1 / (1 / e1.w + 1 / e2.w);
      e1 = {std::min(x, y), std::max(x, y), w, true};
      e2.alive = false;
      gone[v] = 1;
      changed = true;
      out.log.push_back({ReductionStep::Kind::Series, std::min(x, y), std::max(x, y), v,
                         static_cast<double>(w)});
      break;  // incidence lists are stale after a splice
    }
  }
  out.vertex_map.assign(g.n(), kNone);
  VertexId next = 0;
  for (VertexId v = 0; v < g.n(); ++v)
    if (!gone[v]) out.vertex_map[v] = next++;
  std::vector<Edge> kept;
  for (const auto& e : edges) {
    if (!e.alive) continue;
    kept.push_back({out.vertex_map[e.a], out.vertex_map[e.b]});
    out.weight.push_back(static_cast<double>(e.w));
  }
  out.graph = MultiGraph(next, std::move(kept));
  return out;
}

// ------------------------------------------------------------- Kirchhoff

/// P(e in T) = w(e) R_eff(e-, e+), computed without cancellation.
inline double kirchhoff_edge_probability(const WeightedGraphView& wg, EdgeId e) {
  const auto& g = wg.graph();
  require(e < g.m(), ErrorKind::InvalidArgument, "unknown edge id");
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  require(g.n() <= kDenseLimit, ErrorKind::TooLarge, "graph too large for dense solve");
  auto [w, log_scale] = wg.scaled_weights();
  (void)log_scale;
  auto c = detail::conductance_matrix(g.n(), g, detail::identity_map(g.n()), w);
  GroundedElimination elim(c, order_with_last(g.n(), g.edge(e).head, g.edge(e).tail));
  return static_cast<double>(std::min<Real>(1, w[e] / elim.last_pivot()));
}

enum class SolveMethod { Auto, Fast, Robust };

/// P(e in T) for every edge.
///
/// Fast: one factorization, R = G_uu + G_vv - 2 G_uv. Robust: one elimination
/// per distinct edge head, reading R(tail, head) off the inverse diagonal with
/// no subtraction anywhere. Auto picks Robust when the weights spread over
/// more than e^20 and the graph is small enough.
inline std::vector<double> edge_probabilities(const WeightedGraphView& wg,
                                              SolveMethod method = SolveMethod::Auto) {
  const auto& g = wg.graph();
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  require(g.n() <= 2 * kDenseLimit, ErrorKind::TooLarge, "graph too large for dense solve");
  std::vector<double> p(g.m(), 0);
  if (g.n() <= 1) return p;
  auto [w, log_scale] = wg.scaled_weights();
  (void)log_scale;
  if (method == SolveMethod::Auto) {
    Real lo = 1;
    for (auto x : w) lo = std::min(lo, x);
    method = (lo < std::exp(Real(-20)) && g.n() <= 400) ? SolveMethod::Robust : SolveMethod::Fast;
  }
  auto c = detail::conductance_matrix(g.n(), g, detail::identity_map(g.n()), w);
  if (method == SolveMethod::Fast) {
    VertexId ground = static_cast<VertexId>(g.n() - 1);
    GroundedElimination elim(c, order_with_last(g.n(), ground));
    auto inv = elim.inverse();
    for (EdgeId e = 0; e < g.m(); ++e) {
      auto a = g.edge(e).tail, b = g.edge(e).head;
      Real r = inv(a, a) + inv(b, b) - 2 * inv(a, b);
      p[e] = static_cast<double>(std::clamp<Real>(w[e] * r, 0, 1));
    }
    return p;
  }
  std::vector<std::vector<EdgeId>> by_head(g.n());
  for (EdgeId e = 0; e < g.m(); ++e) by_head[g.edge(e).head].push_back(e);
  for (VertexId h = 0; h < g.n(); ++h) {
    if (by_head[h].empty()) continue;
    GroundedElimination elim(c, order_with_last(g.n(), h));
    auto diag = elim.inverse_diagonal();
    for (EdgeId e : by_head[h])
      p[e] = static_cast<double>(std::min<Real>(1, w[e] * diag[g.edge(e).tail]));
  }
  return p;
}

/// Y(e, f): current through f (tail -> head) when a unit current enters at
/// e's tail and leaves at e's head.
struct TransferImpedance {
  std::vector<EdgeId> edges;
  Dense<double> Y;
};

inline TransferImpedance transfer_impedance_matrix(const WeightedGraphView& wg,
                                                   std::span<const EdgeId> edges) {
  const auto& g = wg.graph();
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  require(g.n() <= kDenseLimit, ErrorKind::TooLarge, "graph too large for dense solve");
  {
    std::vector<EdgeId> sorted(edges.begin(), edges.end());
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            ErrorKind::InvalidArgument, "edges must be distinct");
    for (auto e : sorted) require(e < g.m(), ErrorKind::InvalidArgument, "unknown edge id");
  }
  auto [w, log_scale] = wg.scaled_weights();
  (void)log_scale;
  auto c = detail::conductance_matrix(g.n(), g, detail::identity_map(g.n()), w);
  const std::size_t k = edges.size();
  TransferImpedance ti{std::vector<EdgeId>(edges.begin(), edges.end()), Dense<double>(k)};
  if (k == 0) return ti;
  VertexId ground = static_cast<VertexId>(g.n() - 1);
  GroundedElimination elim(c, order_with_last(g.n(), ground));
  for (std::size_t i = 0; i < k; ++i) {
    const auto& e = g.edge(edges[i]);
    std::vector<Real> b(g.n(), 0);
    b[e.tail] += 1;
    b[e.head] -= 1;
    auto x = elim.solve(b);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& f = g.edge(edges[j]);
      ti.Y(i, j) = static_cast<double>(w[edges[j]] * (x[f.tail] - x[f.head]));
    }
  }
  return ti;
}

/// P(all `edges` in T) = det of the restricted transfer-impedance matrix.
inline double joint_edge_probability(const WeightedGraphView& wg, std::span<const EdgeId> edges) {
  require(edges.size() <= 64, ErrorKind::TooLarge, "at most 64 edges per joint probability");
  if (edges.empty()) return 1;
  auto ti = transfer_impedance_matrix(wg, edges);
  Dense<Real> y(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i)
    for (std::size_t j = 0; j < edges.size(); ++j) y(i, j) = ti.Y(i, j);
  double det = static_cast<double>(determinant(y));
  if (det < 0) {
    require(det >= -1e-9, ErrorKind::NumericalFailure,
            "joint probability determinant " + std::to_string(det) + " below 0");
    det = 0;
  }
  if (det > 1) {
    require(det <= 1 + 1e-9, ErrorKind::NumericalFailure,
            "joint probability determinant " + std::to_string(det) + " above 1");
    det = 1;
  }
  return det;
}

/// Sum over disjoint cutsets of (total conductance)^-1, a lower bound on
/// R_eff(A <-> B).
inline double nash_williams_lower_bound(const WeightedGraphView& wg, std::span<const VertexId> A,
                                        std::span<const VertexId> B,
                                        const std::vector<std::vector<EdgeId>>& cutsets) {
  const auto& g = wg.graph();
  std::vector<char> used(g.m(), 0);
  double bound = 0;
  for (const auto& cut : cutsets) {
    std::vector<char> removed(g.m(), 0);
    double total = 0;
    for (EdgeId e : cut) {
      require(e < g.m(), ErrorKind::InvalidArgument, "unknown edge id");
      require(!used[e], ErrorKind::InvalidCutset, "cutsets must be pairwise disjoint");
      used[e] = removed[e] = 1;
      total += wg.weight(e);
    }
    std::vector<char> seen(g.n(), 0);
    std::vector<VertexId> stack(A.begin(), A.end());
    for (auto v : A) seen[v] = 1;
    while (!stack.empty()) {
      auto x = stack.back();
      stack.pop_back();
      for (const auto& inc : g.incident(x)) {
        if (removed[inc.edge] || seen[inc.other]) continue;
        seen[inc.other] = 1;
        stack.push_back(inc.other);
      }
    }
    for (auto v : B)
      require(!seen[v], ErrorKind::InvalidCutset, "an edge set does not separate A from B");
    bound += 1 / total;
  }
  return bound;
}

}  // namespace rstre
