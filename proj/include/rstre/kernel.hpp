#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "environment.hpp"
#include "graph.hpp"

namespace rstre {

/// Iterated removal of vertices of degree <= 1. Returns the induced subgraph
/// on the survivors (original ids kept in the maps).
inline InducedSubgraph two_core(const MultiGraph& g) {
  std::vector<std::size_t> deg(g.n());
  std::vector<char> removed(g.n(), 0);
  std::vector<VertexId> stack;
  for (VertexId v = 0; v < g.n(); ++v) {
    deg[v] = g.degree(v);
    if (deg[v] <= 1) {
      removed[v] = 1;
      stack.push_back(v);
    }
  }
  while (!stack.empty()) {
    VertexId v = stack.back();
    stack.pop_back();
    for (const auto& inc : g.incident(v)) {
      VertexId u = inc.other;
      if (removed[u]) continue;
      if (--deg[u] <= 1) {
        removed[u] = 1;
        stack.push_back(u);
      }
    }
  }
  std::vector<VertexId> keep;
  for (VertexId v = 0; v < g.n(); ++v)
    if (!removed[v]) keep.push_back(v);
  return induced_subgraph(g, keep);
}

/// |E| - |V|.
inline long long graph_excess(const MultiGraph& g) {
  return static_cast<long long>(g.m()) - static_cast<long long>(g.n());
}

struct KernelDecomposition {
  InducedSubgraph core;                   // two-core, original ids in the maps
  MultiGraph kernel;                      // vertices of degree >= 3
  std::vector<VertexId> kernel_vertices;  // kernel vertex -> original vertex
  std::vector<std::vector<EdgeId>> phi;   // kernel edge -> original edges along its path
  std::vector<double> log_weight;         // log of the series weight per kernel edge
  std::vector<std::vector<EdgeId>> cycles;  // dropped cycles (components or loops), original edges
  std::vector<EdgeId> bridges;            // original edges removed by peeling

  double weight(std::size_t k) const { return std::exp(log_weight[k]); }
  WeightedGraphView view() const { return WeightedGraphView::from_log_weights(kernel, log_weight); }
};

/// Kernel of a weighted multigraph: peel to the two-core, drop cycles that
/// form whole components or close on a single vertex, splice out degree-2
/// vertices (series law), and repeat until nothing changes. Parallel kernel
/// edges are kept distinct.
///
/// `log_w[e]` is the log conductance of original edge e.
inline KernelDecomposition kernel_decompose(const MultiGraph& g, const std::vector<double>& log_w) {
  require(log_w.size() == g.m(), ErrorKind::InvalidArgument, "one weight per edge required");
  KernelDecomposition kd;
  kd.core = two_core(g);

  struct Super {
    VertexId a, b;               // original vertex ids
    std::vector<EdgeId> path;    // oriented from a to b
    double log_resistance;       // log of the summed resistances
    bool alive;
  };
  auto log_add = [](double x, double y) {
    double hi = std::max(x, y), lo = std::min(x, y);
    return hi + std::log1p(std::exp(lo - hi));
  };
  std::vector<Super> se;
  for (EdgeId e = 0; e < g.m(); ++e)
    se.push_back({g.edge(e).tail, g.edge(e).head, {e}, -log_w[e], true});
  std::vector<char> alive_v(g.n(), 1);
  std::vector<std::vector<std::size_t>> inc(g.n());
  auto rebuild = [&]() {
    for (auto& l : inc) l.clear();
    for (std::size_t i = 0; i < se.size(); ++i) {
      if (!se[i].alive) continue;
      inc[se[i].a].push_back(i);
      if (se[i].b != se[i].a) inc[se[i].b].push_back(i);
    }
  };
  auto degree = [&](VertexId v) {
    std::size_t d = 0;
    for (auto i : inc[v]) d += se[i].a == se[i].b ? 2 : 1;
    return d;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    // Loops close a cycle on one vertex: that cycle is independent of the rest.
    for (auto& s : se) {
      if (s.alive && s.a == s.b) {
        kd.cycles.push_back(s.path);
        s.alive = false;
        changed = true;
      }
    }
    rebuild();
    // Peel.
    std::vector<VertexId> stack;
    std::vector<std::size_t> deg(g.n(), 0);
    for (VertexId v = 0; v < g.n(); ++v) {
      if (!alive_v[v]) continue;
      deg[v] = degree(v);
      if (deg[v] <= 1) stack.push_back(v);
    }
    while (!stack.empty()) {
      VertexId v = stack.back();
      stack.pop_back();
      if (!alive_v[v]) continue;
      alive_v[v] = 0;
      changed = true;
      for (auto i : inc[v]) {
        if (!se[i].alive) continue;
        se[i].alive = false;
        kd.bridges.insert(kd.bridges.end(), se[i].path.begin(), se[i].path.end());
        VertexId u = se[i].a == v ? se[i].b : se[i].a;
        if (alive_v[u] && --deg[u] <= 1) stack.push_back(u);
      }
    }
    rebuild();
    // Components in which every vertex has degree 2 are simple cycles.
    {
      std::vector<char> seen(g.n(), 0);
      for (VertexId s = 0; s < g.n(); ++s) {
        if (!alive_v[s] || seen[s]) continue;
        std::vector<VertexId> comp{s};
        seen[s] = 1;
        bool all2 = true;
        for (std::size_t h = 0; h < comp.size(); ++h) {
          VertexId x = comp[h];
          all2 = all2 && degree(x) == 2;
          for (auto i : inc[x]) {
            VertexId y = se[i].a == x ? se[i].b : se[i].a;
            if (!seen[y]) {
              seen[y] = 1;
              comp.push_back(y);
            }
          }
        }
        if (!all2) continue;
        // Walk the cycle to record its edges in order.
        std::vector<EdgeId> cyc;
        std::vector<char> used_edge(se.size(), 0);
        VertexId x = s;
        std::size_t from = inc[s].front();
        for (std::size_t step = 0; step < comp.size(); ++step) {
          auto& sx = se[from];
          used_edge[from] = 1;
          bool forward = sx.a == x;
          if (forward) {
            cyc.insert(cyc.end(), sx.path.begin(), sx.path.end());
          } else {
            cyc.insert(cyc.end(), sx.path.rbegin(), sx.path.rend());
          }
          x = forward ? sx.b : sx.a;
          for (auto i : inc[x])
            if (!used_edge[i]) from = i;
        }
        for (VertexId y : comp) {
          alive_v[y] = 0;
          for (auto i : inc[y]) se[i].alive = false;
        }
        kd.cycles.push_back(std::move(cyc));
        changed = true;
      }
    }
    rebuild();
    // Series contraction of degree-2 vertices.
    for (VertexId v = 0; v < g.n(); ++v) {
      if (!alive_v[v] || inc[v].size() != 2 || degree(v) != 2) continue;
      std::size_t i1 = inc[v][0], i2 = inc[v][1];
      if (!se[i1].alive || !se[i2].alive) continue;
      auto toward = [&](const Super& s, bool to_v) {
        // path oriented so that it ends at v (to_v) or starts at v
        std::vector<EdgeId> p = s.path;
        bool ends_at_v = s.b == v;
        if (ends_at_v != to_v) std::reverse(p.begin(), p.end());
        return p;
      };
      VertexId x = se[i1].a == v ? se[i1].b : se[i1].a;
      VertexId y = se[i2].a == v ? se[i2].b : se[i2].a;
      Super merged{x, y, toward(se[i1], true), log_add(se[i1].log_resistance, se[i2].log_resistance), true};
      auto tail = toward(se[i2], false);
      merged.path.insert(merged.path.end(), tail.begin(), tail.end());
      if (merged.a > merged.b) {
        std::swap(merged.a, merged.b);
        std::reverse(merged.path.begin(), merged.path.end());
      }
      se[i1].alive = false;
      se[i2].alive = false;
      alive_v[v] = 0;
      se.push_back(std::move(merged));
      changed = true;
      rebuild();
    }
  }

  std::vector<VertexId> local(g.n(), kNone);
  for (VertexId v = 0; v < g.n(); ++v) {
    if (!alive_v[v]) continue;
    local[v] = static_cast<VertexId>(kd.kernel_vertices.size());
    kd.kernel_vertices.push_back(v);
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < se.size(); ++i)
    if (se[i].alive) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return *std::min_element(se[x].path.begin(), se[x].path.end()) <
           *std::min_element(se[y].path.begin(), se[y].path.end());
  });
  std::vector<Edge> kedges;
  for (auto i : order) {
    kedges.push_back({local[se[i].a], local[se[i].b]});
    kd.phi.push_back(se[i].path);
    kd.log_weight.push_back(-se[i].log_resistance);
  }
  kd.kernel = MultiGraph(kd.kernel_vertices.size(), std::move(kedges));
  std::sort(kd.bridges.begin(), kd.bridges.end());
  return kd;
}

inline KernelDecomposition kernel_decompose(const WeightedGraphView& wg) {
  std::vector<double> lw(wg.m());
  for (EdgeId e = 0; e < wg.m(); ++e) lw[e] = wg.log_weight(e);
  return kernel_decompose(wg.graph(), lw);
}

}  // namespace rstre
