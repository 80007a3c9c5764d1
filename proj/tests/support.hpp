#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "rstre/environment.hpp"
#include "rstre/graph.hpp"

namespace testing_support {

using rstre::Edge;
using rstre::EdgeId;
using rstre::MultiGraph;
using rstre::VertexId;

/// Connected multigraph: a random spanning path-tree plus `extra` random
/// edges (parallel edges allowed, loops not).
inline MultiGraph random_connected(std::size_t n, std::size_t extra, std::mt19937_64& rng) {
  std::vector<Edge> e;
  for (VertexId v = 1; v < n; ++v) {
    auto u = static_cast<VertexId>(std::uniform_int_distribution<std::size_t>(0, v - 1)(rng));
    e.push_back({u, v});
  }
  for (std::size_t i = 0; i < extra && n >= 2; ++i) {
    auto a = static_cast<VertexId>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    auto b = static_cast<VertexId>(std::uniform_int_distribution<std::size_t>(0, n - 2)(rng));
    if (b >= a) ++b;
    e.push_back({std::min(a, b), std::max(a, b)});
  }
  return MultiGraph(n, std::move(e));
}

inline std::vector<double> random_omega(std::size_t m, std::mt19937_64& rng, double lo = 0, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> w(m);
  for (auto& x : w) x = u(rng);
  return w;
}

/// All spanning trees by brute force over (n-1)-subsets of edges.
inline std::vector<std::vector<EdgeId>> brute_force_trees(const MultiGraph& g) {
  std::vector<std::vector<EdgeId>> out;
  const std::size_t n = g.n(), m = g.m();
  if (n == 1) return {{}};
  std::vector<EdgeId> pick;
  auto rec = [&](auto&& self, EdgeId start) -> void {
    if (pick.size() == n - 1) {
      std::vector<VertexId> parent(n);
      std::iota(parent.begin(), parent.end(), 0);
      auto find = [&](VertexId x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
      };
      for (EdgeId e : pick) {
        auto a = find(g.edge(e).tail), b = find(g.edge(e).head);
        if (a == b) return;
        parent[a] = b;
      }
      out.push_back(pick);
      return;
    }
    for (EdgeId e = start; e < m; ++e) {
      if (m - e < n - 1 - pick.size()) break;
      pick.push_back(e);
      self(self, e + 1);
      pick.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

/// Determinant of the reduced weighted Laplacian by Gaussian elimination
/// with partial pivoting (double precision).
inline double laplacian_minor(const MultiGraph& g, const std::vector<double>& w) {
  const std::size_t n = g.n();
  if (n <= 1) return 1;
  std::vector<std::vector<double>> a(n - 1, std::vector<double>(n - 1, 0));
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto u = g.edge(e).tail, v = g.edge(e).head;
    if (u + 1 < n) a[u][u] += w[e];
    if (v + 1 < n) a[v][v] += w[e];
    if (u + 1 < n && v + 1 < n) {
      a[u][v] -= w[e];
      a[v][u] -= w[e];
    }
  }
  double det = 1;
  for (std::size_t c = 0; c + 1 < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r + 1 < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (a[p][c] == 0) return 0;
    if (p != c) {
      std::swap(a[p], a[c]);
      det = -det;
    }
    det *= a[c][c];
    for (std::size_t r = c + 1; r + 1 < n; ++r) {
      double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k + 1 < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return det;
}

/// Tree probabilities from brute-force enumeration.
struct BruteLaw {
  std::vector<std::vector<EdgeId>> trees;
  std::vector<double> prob;
  std::vector<double> marginal;
};

inline BruteLaw brute_law(const MultiGraph& g, const std::vector<double>& omega, double beta) {
  BruteLaw law;
  law.trees = brute_force_trees(g);
  double z = 0;
  for (const auto& t : law.trees) {
    double h = 0;
    for (EdgeId e : t) h += omega[e];
    law.prob.push_back(std::exp(-beta * h));
    z += law.prob.back();
  }
  law.marginal.assign(g.m(), 0);
  for (std::size_t i = 0; i < law.trees.size(); ++i) {
    law.prob[i] /= z;
    for (EdgeId e : law.trees[i]) law.marginal[e] += law.prob[i];
  }
  return law;
}

inline std::string fixture(const std::string& name) { return std::string(RSTRE_FIXTURES) + "/" + name; }

}  // namespace testing_support
