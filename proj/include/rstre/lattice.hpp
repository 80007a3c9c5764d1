#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "electric.hpp"
#include "environment.hpp"
#include "graph.hpp"
#include "sampler.hpp"

namespace rstre {

enum class Boundary { Free, Wired };

/// Z^d edge {x, x + e_axis}, keyed so that boxes of different sizes share
/// the same disorder on common edges.
struct LatticeEdge {
  std::vector<std::int64_t> x;
  std::uint32_t axis = 0;

  std::uint64_t key() const {
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      k |= static_cast<std::uint64_t>(x[i] + (1 << 19)) << (20 * i);
    return k * 4 + axis;
  }
};

struct BoundaryGraph {
  MultiGraph graph;
  std::size_t L = 0;
  std::size_t d = 1;
  Boundary condition = Boundary::Free;
  VertexId dagger = kNone;
  std::vector<LatticeEdge> provenance;  // per edge; for dagger edges the lattice edge leaving the box
  std::size_t internal_edges = 0;       // edges [0, internal_edges) lie inside the box

  std::size_t volume() const { return condition == Boundary::Wired ? graph.n() - 1 : graph.n(); }
  bool is_dagger_edge(EdgeId e) const { return e >= internal_edges; }

  /// Edge id of a lattice edge inside the box, kNone if absent.
  EdgeId find(const LatticeEdge& le) const {
    for (EdgeId e = 0; e < internal_edges; ++e)
      if (provenance[e].axis == le.axis && provenance[e].x == le.x) return e;
    return kNone;
  }
};

/// Free or wired box [-L, L]^d. The wired graph adds a vertex joined by one
/// edge to each inner boundary vertex (or, with `parallel_dagger`, one edge
/// per lattice edge leaving the box).
inline BoundaryGraph build_boundary_box(std::size_t L, std::size_t d, Boundary condition,
                                        bool parallel_dagger = false) {
  require(d >= 1 && d <= 3, ErrorKind::InvalidArgument, "dimension must be 1, 2 or 3");
  require(L < (1u << 18), ErrorKind::InvalidArgument, "box too large");
  BoundaryGraph bg;
  bg.L = L;
  bg.d = d;
  bg.condition = condition;
  auto box = build_box(L, d);
  BoxShape shape{2 * L + 1, d};
  std::vector<Edge> edges(box.edges().begin(), box.edges().end());
  for (const auto& e : edges) {
    auto c = shape.coords(e.tail), c2 = shape.coords(e.head);
    LatticeEdge le;
    for (std::size_t i = 0; i < d; ++i) {
      le.x.push_back(static_cast<std::int64_t>(c[i]) - static_cast<std::int64_t>(L));
      if (c[i] != c2[i]) le.axis = static_cast<std::uint32_t>(i);
    }
    bg.provenance.push_back(std::move(le));
  }
  bg.internal_edges = edges.size();
  if (condition == Boundary::Wired) {
    bg.dagger = static_cast<VertexId>(box.n());
    const auto side = static_cast<std::int64_t>(2 * L + 1);
    for (VertexId v = 0; v < box.n(); ++v) {
      auto c = shape.coords(v);
      for (std::uint32_t axis = 0; axis < d; ++axis) {
        bool done = false;
        for (int dir : {-1, 1}) {
          auto y = static_cast<std::int64_t>(c[axis]) + dir;
          if (y >= 0 && y < side) continue;
          LatticeEdge le;
          for (std::size_t i = 0; i < d; ++i) le.x.push_back(static_cast<std::int64_t>(c[i]) - static_cast<std::int64_t>(L));
          le.axis = axis;
          if (dir < 0) le.x[axis] -= 1;
          edges.push_back({v, bg.dagger});
          bg.provenance.push_back(std::move(le));
          done = true;
          if (!parallel_dagger) break;
        }
        if (done && !parallel_dagger) break;
      }
    }
    bg.graph = MultiGraph(box.n() + 1, std::move(edges));
  } else {
    bg.graph = std::move(box);
  }
  return bg;
}

inline std::vector<double> lattice_environment(const BoundaryGraph& bg, const DisorderLaw& law, std::uint64_t seed) {
  std::vector<double> omega;
  omega.reserve(bg.provenance.size());
  for (const auto& le : bg.provenance) omega.push_back(omega_at(law, seed, le.key()));
  return omega;
}

/// log Z / |Lambda| (the wired extra vertex is not counted).
inline double free_energy(const BoundaryGraph& bg, const std::vector<double>& omega, double beta) {
  return matrix_tree_log_partition(WeightedGraphView(bg.graph, omega, beta)) /
         static_cast<double>(bg.volume());
}

/// sum over box edges of P(e in T)^2, divided by |Lambda| - 1.
inline double overlap_density(const BoundaryGraph& bg, const std::vector<double>& omega, double beta) {
  require(bg.volume() >= 2, ErrorKind::InvalidArgument, "box needs at least two vertices");
  auto p = edge_probabilities(WeightedGraphView(bg.graph, omega, beta));
  double s = 0;
  for (EdgeId e = 0; e < bg.internal_edges; ++e) s += p[e] * p[e];
  return s / static_cast<double>(bg.volume() - 1);
}

struct CylinderReport {
  std::vector<std::size_t> L;
  std::vector<double> free;   // P^F(A in T)
  std::vector<double> wired;  // P^W(A in T)
  bool free_nonincreasing = true;
  bool wired_nondecreasing = true;
  bool wired_below_free = true;
  bool passed() const { return free_nonincreasing && wired_nondecreasing && wired_below_free; }
};

/// Cylinder probabilities of the lattice edge set A over boxes L in
/// [L_min, L_max] for the environment (law, seed). The wired box is the
/// contraction of the exterior, so every edge leaving the box keeps its own
/// dagger edge and disorder value.
inline CylinderReport cylinder_probabilities(std::span<const LatticeEdge> A, std::size_t L_min, std::size_t L_max,
                                             std::size_t d, const DisorderLaw& law, std::uint64_t seed,
                                             double beta, double slack = 1e-9) {
  CylinderReport r;
  for (std::size_t L = L_min; L <= L_max; ++L) {
    double pf = 0, pw = 0;
    for (auto cond : {Boundary::Free, Boundary::Wired}) {
      auto bg = build_boundary_box(L, d, cond, true);
      std::vector<EdgeId> ids;
      for (const auto& le : A) {
        EdgeId e = bg.find(le);
        require(e != kNone, ErrorKind::InvalidArgument, "cylinder edge outside the smallest box");
        ids.push_back(e);
      }
      double p = joint_edge_probability(WeightedGraphView(bg.graph, lattice_environment(bg, law, seed), beta), ids);
      (cond == Boundary::Free ? pf : pw) = p;
    }
    if (!r.free.empty()) {
      r.free_nonincreasing = r.free_nonincreasing && pf <= r.free.back() + slack;
      r.wired_nondecreasing = r.wired_nondecreasing && pw >= r.wired.back() - slack;
    }
    r.wired_below_free = r.wired_below_free && pw <= pf + slack;
    r.L.push_back(L);
    r.free.push_back(pf);
    r.wired.push_back(pw);
  }
  return r;
}

inline CylinderReport cylinder_monotonicity_check(std::span<const LatticeEdge> A, std::size_t L_min,
                                                  std::size_t L_max, std::size_t d, const DisorderLaw& law,
                                                  std::uint64_t seed, double beta, double slack = 1e-9) {
  auto r = cylinder_probabilities(A, L_min, L_max, d, law, seed, beta, slack);
  if (!r.passed()) {
    std::string msg = "cylinder monotonicity violated:";
    for (std::size_t i = 0; i < r.L.size(); ++i)
      msg += " L=" + std::to_string(r.L[i]) + " F=" + std::to_string(r.free[i]) + " W=" + std::to_string(r.wired[i]);
    fail(ErrorKind::CheckFailed, msg);
  }
  return r;
}

struct TreeCountGrowth {
  std::vector<std::size_t> L;
  std::vector<double> value;       // log |T(Lambda_L)| / |Lambda_L|
  std::vector<double> richardson;  // side-weighted extrapolation from consecutive pairs
};

inline TreeCountGrowth tree_count_growth(std::size_t d, std::size_t L_max) {
  require(d >= 1 && d <= 3, ErrorKind::InvalidArgument, "dimension must be 1, 2 or 3");
  std::size_t vol = 1;
  for (std::size_t i = 0; i < d; ++i) vol *= 2 * L_max + 1;
  require(vol <= kDenseLimit, ErrorKind::TooLarge, "box too large for the dense determinant");
  TreeCountGrowth r;
  for (std::size_t L = 1; L <= L_max; ++L) {
    auto bg = build_boundary_box(L, d, Boundary::Free);
    r.L.push_back(L);
    r.value.push_back(free_energy(bg, std::vector<double>(bg.graph.m(), 0.0), 0.0));
    if (r.value.size() >= 2) {
      double s1 = static_cast<double>(2 * L + 1), s0 = static_cast<double>(2 * L - 1);
      r.richardson.push_back((s1 * r.value.back() - s0 * r.value[r.value.size() - 2]) / (s1 - s0));
    }
  }
  return r;
}

}  // namespace rstre
