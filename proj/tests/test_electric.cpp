#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rstre/electric.hpp"
#include "rstre/graph.hpp"
#include "support.hpp"

using namespace rstre;
using testing_support::brute_law;
using testing_support::laplacian_minor;
using testing_support::random_connected;
using testing_support::random_omega;

namespace {

WeightedGraphView random_view(std::mt19937_64& rng, std::size_t n, std::size_t extra, double spread = 2) {
  auto g = random_connected(n, extra, rng);
  return WeightedGraphView(g, random_omega(g.m(), rng, -spread / 2, spread / 2), 1.0);
}

// R(u, v) = tau(G with u, v glued) / tau(G), both weighted.
double resistance_oracle(const WeightedGraphView& wg, VertexId u, VertexId v) {
  std::vector<double> w(wg.m());
  for (EdgeId e = 0; e < wg.m(); ++e) w[e] = wg.weight(e);
  std::vector<Edge> glued;
  std::vector<double> gw;
  for (EdgeId e = 0; e < wg.m(); ++e) {
    auto a = wg.graph().edge(e).tail, b = wg.graph().edge(e).head;
    if (a == v) a = u;
    if (b == v) b = u;
    if (a == b) continue;
    auto fix = [&](VertexId x) { return x > v ? x - 1 : x; };
    glued.push_back({std::min(fix(a), fix(b)), std::max(fix(a), fix(b))});
    gw.push_back(w[e]);
  }
  MultiGraph h(wg.n() - 1, glued);
  return laplacian_minor(h, gw) / laplacian_minor(wg.graph(), w);
}

}  // namespace

TEST(EffectiveResistance, Examples) {
  MultiGraph edge(2, {{0, 1}});
  EXPECT_NEAR(effective_resistance(WeightedGraphView::from_weights(edge, {4.0}), 0, 1), 0.25, 1e-12);
  EXPECT_NEAR(effective_resistance(WeightedGraphView::unweighted(build_complete(3)), 0, 1), 2.0 / 3, 1e-12);
  MultiGraph par(2, {{0, 1}, {0, 1}});
  EXPECT_NEAR(effective_resistance(WeightedGraphView::from_weights(par, {2.0, 3.0}), 0, 1), 0.2, 1e-12);
  MultiGraph split(4, {{0, 1}, {2, 3}});
  EXPECT_EQ(effective_resistance(WeightedGraphView::unweighted(split), 0, 3), kInfinity);
}

TEST(EffectiveResistance, SetsAndSymmetry) {
  auto g = build_box(2, 1);  // path of 5 vertices
  auto wg = WeightedGraphView::unweighted(g);
  std::vector<VertexId> A{0, 1}, B{4};
  EXPECT_NEAR(effective_resistance(wg, A, B), 3.0, 1e-12);
  EXPECT_NEAR(effective_resistance(wg, B, A), 3.0, 1e-12);
}

TEST(Property, ResistanceMatchesTreeCountRatio) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    auto wg = random_view(rng, 2 + trial % 9, trial % 7);
    VertexId u = 0, v = static_cast<VertexId>(wg.n() - 1);
    EXPECT_NEAR(effective_resistance(wg, u, v), resistance_oracle(wg, u, v),
                1e-9 * resistance_oracle(wg, u, v));
  }
}

TEST(Property, TriangleInequality) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    auto wg = random_view(rng, 4 + trial % 6, 4);
    auto r0 = resistance_to(wg, 0);
    auto r1 = resistance_to(wg, 1);
    for (VertexId x = 2; x < wg.n(); ++x) EXPECT_LE(r0[x], r0[1] + r1[x] + 1e-9);
    for (VertexId x = 0; x < wg.n(); ++x) EXPECT_NEAR(r0[x], x == 0 ? 0 : effective_resistance(wg, 0, x), 1e-9);
  }
}

TEST(Voltages, HarmonicOffBoundary) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto wg = random_view(rng, 8, 8);
    std::vector<VertexId> A{0}, B{7};
    auto vol = voltages(wg, A, B);
    EXPECT_NEAR(vol.v[0], vol.resistance, 1e-9);
    EXPECT_NEAR(vol.v[7], 0, 1e-12);
    for (VertexId x = 1; x < 7; ++x) {
      double num = 0, den = 0;
      for (const auto& inc : wg.graph().incident(x)) {
        num += wg.weight(inc.edge) * vol.v[inc.other];
        den += wg.weight(inc.edge);
      }
      EXPECT_NEAR(vol.v[x], num / den, 1e-9);
    }
  }
}

TEST(UnitCurrent, Examples) {
  MultiGraph edge(2, {{0, 1}});
  EXPECT_NEAR(unit_current_flow(WeightedGraphView::unweighted(edge), 0, 1).theta[0], 1, 1e-12);
  auto tri = WeightedGraphView::unweighted(build_complete(3));  // edges 01, 02, 12
  auto f = unit_current_flow(tri, 0, 1);
  EXPECT_NEAR(f.theta[0], 2.0 / 3, 1e-12);
  EXPECT_NEAR(f.theta[1], 1.0 / 3, 1e-12);
  EXPECT_NEAR(f.theta[2], -1.0 / 3, 1e-12);
  MultiGraph square(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
  auto s = unit_current_flow(WeightedGraphView::unweighted(square), 0, 2);
  EXPECT_NEAR(s.theta[0], 0.5, 1e-12);
  EXPECT_NEAR(s.theta[3], 0.5, 1e-12);
  MultiGraph split(4, {{0, 1}, {2, 3}});
  EXPECT_THROW(unit_current_flow(WeightedGraphView::unweighted(split), 0, 3), Error);
}

TEST(Property, ThompsonPrinciple) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto wg = random_view(rng, 2 + trial % 10, trial % 8, 4);
    VertexId u = 0, v = static_cast<VertexId>(wg.n() - 1);
    auto f = unit_current_flow(wg, u, v);
    double r = effective_resistance(wg, u, v);
    EXPECT_NEAR(flow_energy(f, wg), r, 1e-9 * std::max(1.0, r));
    for (VertexId x = 0; x < wg.n(); ++x) {
      double expect = x == u ? 1 : x == v ? -1 : 0;
      EXPECT_NEAR(f.divergence(wg.graph(), x), expect, 1e-9);
    }
    // A competitor: push the unit along the BFS-tree path from u to v.
    const auto& g = wg.graph();
    std::vector<EdgeId> via(g.n(), static_cast<EdgeId>(-1));
    std::vector<char> seen(g.n(), 0);
    std::vector<VertexId> queue{u};
    seen[u] = 1;
    for (std::size_t i = 0; i < queue.size(); ++i)
      for (const auto& inc : g.incident(queue[i]))
        if (!seen[inc.other]) {
          seen[inc.other] = 1;
          via[inc.other] = inc.edge;
          queue.push_back(inc.other);
        }
    Flow path;
    path.theta.assign(g.m(), 0);
    for (VertexId x = v; x != u;) {
      EdgeId e = via[x];
      VertexId y = g.edge(e).tail == x ? g.edge(e).head : g.edge(e).tail;
      path.theta[e] = g.edge(e).tail == y ? 1 : -1;
      x = y;
    }
    EXPECT_GE(flow_energy(path, wg), r - 1e-9);
  }
}

TEST(FlowEnergy, DisjointCombination) {
  MultiGraph square(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
  auto wg = WeightedGraphView::from_weights(square, {1, 2, 3, 4});
  Flow zero{std::vector<double>(4, 0)};
  EXPECT_EQ(flow_energy(zero, wg), 0);
  Flow a{{1, 1, 0, 0}}, b{{0, 0, -1, -1}};
  double alpha = 0.3;
  Flow c{{alpha, alpha, -(1 - alpha), -(1 - alpha)}};
  EXPECT_NEAR(flow_energy(c, wg), alpha * alpha * flow_energy(a, wg) + (1 - alpha) * (1 - alpha) * flow_energy(b, wg),
              1e-12);
}

TEST(SeriesParallel, Examples) {
  auto path = WeightedGraphView::unweighted(build_box(2, 1));
  std::vector<VertexId> ends{0, 4};
  auto r = series_parallel_reduce(path, ends);
  ASSERT_EQ(r.graph.m(), 1u);
  EXPECT_NEAR(1 / r.weight[0], 4, 1e-12);

  MultiGraph theta(5, {{0, 2}, {2, 1}, {0, 3}, {3, 1}, {0, 4}, {4, 1}});
  std::vector<VertexId> poles{0, 1};
  auto t = series_parallel_reduce(WeightedGraphView::unweighted(theta), poles);
  ASSERT_EQ(t.graph.m(), 1u);
  EXPECT_NEAR(t.weight[0], 1.5, 1e-12);

  auto k4 = WeightedGraphView::unweighted(build_complete(4));
  auto same = series_parallel_reduce(k4);
  EXPECT_EQ(same.graph.edges(), k4.graph().edges());
  EXPECT_TRUE(same.log.empty());
}

TEST(Property, SeriesParallelPreservesProtectedResistance) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto wg = random_view(rng, 3 + trial % 10, trial % 4);
    std::vector<VertexId> keep{0, static_cast<VertexId>(wg.n() - 1)};
    auto red = series_parallel_reduce(wg, keep);
    double before = effective_resistance(wg, keep[0], keep[1]);
    double after = effective_resistance(red.view(), red.vertex_map[keep[0]], red.vertex_map[keep[1]]);
    EXPECT_NEAR(after, before, 1e-9 * before);
  }
}

TEST(Kirchhoff, Examples) {
  for (std::size_t n : {3u, 7u, 12u}) {
    auto kn = WeightedGraphView::unweighted(build_complete(n));
    for (EdgeId e = 0; e < kn.m(); e += 5) EXPECT_NEAR(kirchhoff_edge_probability(kn, e), 2.0 / n, 1e-12);
  }
  MultiGraph lollipop(4, {{0, 1}, {1, 2}, {2, 3}, {1, 3}});
  EXPECT_NEAR(kirchhoff_edge_probability(WeightedGraphView::unweighted(lollipop), 0), 1, 1e-12);
  MultiGraph par(2, {{0, 1}, {0, 1}, {0, 1}});
  for (double beta : {0.0, 0.5, 3.0}) {
    WeightedGraphView wg(par, {0.1, 1, 10}, beta);
    double expect = std::exp(-beta) / (std::exp(-0.1 * beta) + std::exp(-beta) + std::exp(-10 * beta));
    EXPECT_NEAR(kirchhoff_edge_probability(wg, 1), expect, 1e-12);
  }
  MultiGraph split(4, {{0, 1}, {2, 3}});
  EXPECT_THROW(kirchhoff_edge_probability(WeightedGraphView::unweighted(split), 0), Error);
}

TEST(Property, KirchhoffMatchesEnumeration) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = random_connected(2 + trial % 7, trial % 6, rng);
    auto omega = random_omega(g.m(), rng);
    double beta = 0.5 * (trial % 9);
    WeightedGraphView wg(g, omega, beta);
    auto law = brute_law(g, omega, beta);
    auto fast = edge_probabilities(wg, SolveMethod::Fast);
    auto robust = edge_probabilities(wg, SolveMethod::Robust);
    for (EdgeId e = 0; e < g.m(); ++e) {
      EXPECT_NEAR(kirchhoff_edge_probability(wg, e), law.marginal[e], 1e-9);
      EXPECT_NEAR(fast[e], law.marginal[e], 1e-9);
      EXPECT_NEAR(robust[e], law.marginal[e], 1e-9);
    }
  }
}

TEST(Property, FosterIdentity) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    auto wg = random_view(rng, 2 + trial % 15, trial % 20, 6);
    double s = 0;
    for (EdgeId e = 0; e < wg.m(); ++e)
      s += wg.weight(e) * effective_resistance(wg, wg.graph().edge(e).tail, wg.graph().edge(e).head);
    EXPECT_NEAR(s, wg.n() - 1.0, 1e-9);
    auto p = edge_probabilities(wg);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), wg.n() - 1.0, 1e-9);
  }
}

TEST(EdgeProbabilities, RobustAtHugeSpread) {
  // Path of three edges at huge beta plus a parallel expensive edge: the
  // cheap ones are in the tree almost surely, the expensive one almost never.
  MultiGraph g(3, {{0, 1}, {1, 2}, {0, 2}});
  WeightedGraphView wg(g, {0.0, 0.0, 1.0}, 200.0);
  auto p = edge_probabilities(wg, SolveMethod::Robust);
  EXPECT_NEAR(p[2], 2 * std::exp(-200.0) / (1 + 2 * std::exp(-200.0)), 1e-95);
  EXPECT_GT(p[2], 0);
  EXPECT_NEAR(p[0], 1, 1e-12);
}

TEST(Property, RayleighMonotonicity) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_connected(2 + trial % 11, trial % 9, rng);
    auto omega = random_omega(g.m(), rng);
    WeightedGraphView wg(g, omega, 1.0);
    auto boosted = omega;
    double c = 1 + std::uniform_real_distribution<double>(0, 5)(rng);
    for (auto& w : boosted)
      if (rng() % 2) w -= std::log(c);
    auto wg2 = wg.with_omega(boosted);
    for (VertexId v = 1; v < g.n(); ++v)
      EXPECT_LE(effective_resistance(wg2, 0, v), effective_resistance(wg, 0, v) * (1 + 1e-12));
  }
}

TEST(TransferImpedance, CompleteGraphEntries) {
  const std::size_t n = 10;
  auto g = build_complete(n);
  auto wg = WeightedGraphView::unweighted(g);
  std::vector<EdgeId> all(g.m());
  std::iota(all.begin(), all.end(), 0);
  auto ti = transfer_impedance_matrix(wg, all);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = 0; j < all.size(); ++j) {
      const auto &e = g.edge(all[i]), &f = g.edge(all[j]);
      int shared = (e.tail == f.tail) + (e.tail == f.head) + (e.head == f.tail) + (e.head == f.head);
      double expect = shared == 2 ? 0.2 : shared == 1 ? 0.1 : 0;
      EXPECT_NEAR(std::abs(ti.Y(i, j)), expect, 1e-9);
    }
  MultiGraph edge(2, {{0, 1}});
  std::vector<EdgeId> one{0};
  EXPECT_NEAR(transfer_impedance_matrix(WeightedGraphView::unweighted(edge), one).Y(0, 0), 1, 1e-12);
}

TEST(Property, TransferImpedanceReciprocityAndDiagonal) {
  std::mt19937_64 rng(9);
  auto g = build_complete(5);
  std::vector<EdgeId> all(g.m());
  std::iota(all.begin(), all.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    WeightedGraphView wg(g, random_omega(g.m(), rng), 2.0);
    auto ti = transfer_impedance_matrix(wg, all);
    auto p = edge_probabilities(wg);
    for (std::size_t i = 0; i < all.size(); ++i) {
      EXPECT_NEAR(ti.Y(i, i), p[i], 1e-9);
      for (std::size_t j = 0; j < all.size(); ++j)
        EXPECT_NEAR(ti.Y(i, j) * wg.weight(all[i]), ti.Y(j, i) * wg.weight(all[j]), 1e-9);
    }
  }
}

TEST(JointProbability, Examples) {
  auto tri = WeightedGraphView::unweighted(build_complete(3));
  std::vector<EdgeId> two{0, 1}, cycle{0, 1, 2}, one{2};
  EXPECT_NEAR(joint_edge_probability(tri, two), 1.0 / 3, 1e-12);
  EXPECT_NEAR(joint_edge_probability(tri, cycle), 0, 1e-12);
  EXPECT_NEAR(joint_edge_probability(tri, one), kirchhoff_edge_probability(tri, 2), 1e-12);
  EXPECT_EQ(joint_edge_probability(tri, std::vector<EdgeId>{}), 1);
}

TEST(Property, JointProbabilityMatchesEnumeration) {
  std::mt19937_64 rng(10);
  auto g = build_complete(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto omega = random_omega(g.m(), rng);
    WeightedGraphView wg(g, omega, 1.5);
    auto law = brute_law(g, omega, 1.5);
    std::vector<EdgeId> pick;
    for (EdgeId e = 0; e < g.m(); ++e)
      if (rng() % 3 == 0) pick.push_back(e);
    double expect = 0;
    for (std::size_t t = 0; t < law.trees.size(); ++t)
      if (std::includes(law.trees[t].begin(), law.trees[t].end(), pick.begin(), pick.end())) expect += law.prob[t];
    EXPECT_NEAR(joint_edge_probability(wg, pick), expect, 1e-9);
  }
}

TEST(Property, NegativeCorrelation) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto wg = random_view(rng, 3 + trial % 6, 2 + trial % 5);
    auto p = edge_probabilities(wg);
    for (EdgeId e = 0; e < wg.m(); ++e)
      for (EdgeId f = e + 1; f < wg.m(); ++f) {
        std::vector<EdgeId> pair{e, f};
        EXPECT_LE(joint_edge_probability(wg, pair), p[e] * p[f] + 1e-9);
      }
  }
}

// Conditioning on B absent and A present: the law is the Gibbs law of (G - B) / A.
TEST(Property, SpatialMarkov) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = random_connected(5, 3, rng);
    auto omega = random_omega(g.m(), rng);
    auto law = brute_law(g, omega, 1.0);
    if (law.trees.size() > 200) continue;
    EdgeId a = static_cast<EdgeId>(rng() % g.m()), b = static_cast<EdgeId>(rng() % g.m());
    if (a == b) continue;
    double z = 0;
    std::vector<double> cond(g.m(), 0);
    for (std::size_t t = 0; t < law.trees.size(); ++t) {
      const auto& tr = law.trees[t];
      bool has_a = std::binary_search(tr.begin(), tr.end(), a), has_b = std::binary_search(tr.begin(), tr.end(), b);
      if (!has_a || has_b) continue;
      z += law.prob[t];
      for (EdgeId e : tr) cond[e] += law.prob[t];
    }
    if (z == 0) continue;
    auto deleted = delete_edges(g, std::vector<EdgeId>{b});
    auto contracted = contract_edges(deleted.graph, std::vector<EdgeId>{deleted.edge_map[a]});
    std::vector<EdgeId> original(contracted.graph.m(), kNone);
    for (EdgeId e = 0; e < g.m(); ++e) {
      if (deleted.edge_map[e] == kNone) continue;
      auto c = contracted.edge_map[deleted.edge_map[e]];
      if (c != kNone) original[c] = e;
    }
    std::vector<double> om;
    for (EdgeId e : original) om.push_back(omega[e]);
    if (!contracted.graph.connected()) continue;
    WeightedGraphView h(contracted.graph, om, 1.0);
    auto p = edge_probabilities(h);
    for (EdgeId e = 0; e < contracted.graph.m(); ++e)
      EXPECT_NEAR(p[e], cond[original[e]] / z, 1e-9);
  }
}

TEST(NashWilliams, Examples) {
  const std::size_t n = 6;
  auto kn = WeightedGraphView::unweighted(build_complete(n));
  std::vector<EdgeId> star;
  for (const auto& inc : kn.graph().incident(0)) star.push_back(inc.edge);
  std::vector<VertexId> A{0}, B{5};
  EXPECT_NEAR(nash_williams_lower_bound(kn, A, B, {star}), 1.0 / (n - 1), 1e-12);

  auto path = WeightedGraphView::from_weights(build_box(1, 1), {2.0, 0.5});
  std::vector<VertexId> P{0}, Q{2};
  EXPECT_NEAR(nash_williams_lower_bound(path, P, Q, {{0}, {1}}), effective_resistance(path, 0, 2), 1e-12);

  auto grid = WeightedGraphView::unweighted(build_box(1, 2));
  std::vector<VertexId> corner{0}, far{8};
  std::vector<std::vector<EdgeId>> cuts;
  std::vector<EdgeId> c0, c8;
  for (const auto& inc : grid.graph().incident(0)) c0.push_back(inc.edge);
  for (const auto& inc : grid.graph().incident(8)) c8.push_back(inc.edge);
  double nw = nash_williams_lower_bound(grid, corner, far, {c0, c8});
  EXPECT_NEAR(nw, 1.0, 1e-12);
  EXPECT_LE(nw, effective_resistance(grid, 0, 8));
}

TEST(NashWilliams, RejectsBadCutsets) {
  auto k4 = WeightedGraphView::unweighted(build_complete(4));
  std::vector<VertexId> A{0}, B{3};
  try {
    nash_williams_lower_bound(k4, A, B, {{0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidCutset);
  }
  std::vector<EdgeId> star{0, 1, 2};
  EXPECT_THROW(nash_williams_lower_bound(k4, A, B, {star, star}), Error);
}

TEST(Property, NashWilliamsIsLowerBound) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    auto wg = random_view(rng, 4 + trial % 8, trial % 6);
    VertexId u = 0, v = static_cast<VertexId>(wg.n() - 1);
    // BFS layers from u give disjoint cutsets.
    auto dist = bfs_distances(wg.graph(), u);
    std::vector<std::vector<EdgeId>> cuts(dist[v]);
    for (EdgeId e = 0; e < wg.m(); ++e) {
      auto a = dist[wg.graph().edge(e).tail], b = dist[wg.graph().edge(e).head];
      if (a != b && std::min(a, b) < dist[v]) cuts[std::min(a, b)].push_back(e);
    }
    EXPECT_LE(nash_williams_lower_bound(wg, std::vector<VertexId>{u}, std::vector<VertexId>{v}, cuts),
              effective_resistance(wg, u, v) * (1 + 1e-12));
  }
}
