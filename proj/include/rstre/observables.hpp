#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "electric.hpp"
#include "environment.hpp"
#include "graph.hpp"
#include "linalg.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "stats.hpp"

namespace rstre {

// ---------------------------------------------------------------- overlap

/// O = sum_e P(e in T)^2.
inline double edge_overlap_exact(const WeightedGraphView& wg, SolveMethod method = SolveMethod::Auto) {
  double s = 0;
  for (double p : edge_probabilities(wg, method)) s += p * p;
  return s;
}

inline std::size_t common_edges(const SpanningTree& a, const SpanningTree& b) {
  std::size_t i = 0, j = 0, c = 0;
  while (i < a.edges.size() && j < b.edges.size()) {
    if (a.edges[i] == b.edges[j]) {
      ++c;
      ++i;
      ++j;
    } else if (a.edges[i] < b.edges[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return c;
}

using TreeSampler = std::function<SpanningTree(RngStream&)>;

/// Mean of |T cap T'| over independent pairs; pair i draws from the streams
/// ("overlap", 2i) and ("overlap", 2i+1) of `seed`.
inline Estimate edge_overlap_mc(const TreeSampler& sample, std::size_t pairs, std::uint64_t seed) {
  require(pairs >= 2, ErrorKind::InvalidArgument, "need at least two replica pairs");
  std::vector<double> x(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    RngStream r1(seed, "overlap", 2 * i), r2(seed, "overlap", 2 * i + 1);
    x[i] = static_cast<double>(common_edges(sample(r1), sample(r2)));
  }
  return mean_stderr(x);
}

inline Estimate edge_overlap_mc(const WeightedGraphView& wg, std::size_t pairs, std::uint64_t seed) {
  AliasNetwork net(wg);
  return edge_overlap_mc([&](RngStream& r) { return wilson_sample(net, r); }, pairs, seed);
}

/// g = sum_T P(T)^2.
inline double tree_overlap(const TreeLaw& law) {
  double s = 0;
  for (double p : law.prob) s += p * p;
  return s;
}

inline double tree_overlap_exact(const WeightedGraphView& wg, std::size_t cap = 1'000'000) {
  return tree_overlap(exact_tree_law(wg, cap));
}

// ----------------------------------------------------------------- length

inline double tree_length(const std::vector<double>& omega, const SpanningTree& t) {
  return hamiltonian(omega, t.edges);
}

/// E[L] = sum_e omega_e P(e in T).
inline double expected_length_exact(const WeightedGraphView& wg, SolveMethod method = SolveMethod::Auto) {
  auto p = edge_probabilities(wg, method);
  double s = 0;
  for (EdgeId e = 0; e < wg.m(); ++e) s += wg.omega(e) * p[e];
  return s;
}

// ------------------------------------------------------------ local balls

/// Canonical string of a rooted tree: "(" + sorted child codes + ")".
inline std::string canonical_code(const MultiGraph& t, VertexId root) {
  std::vector<VertexId> order{root}, parent(t.n(), kNone);
  parent[root] = root;
  for (std::size_t h = 0; h < order.size(); ++h)
    for (const auto& inc : t.incident(order[h]))
      if (parent[inc.other] == kNone) {
        parent[inc.other] = order[h];
        order.push_back(inc.other);
      }
  std::vector<std::vector<std::string>> kids(t.n());
  std::vector<std::string> code(t.n());
  for (std::size_t i = order.size(); i-- > 0;) {
    VertexId x = order[i];
    auto& k = kids[x];
    std::sort(k.begin(), k.end());
    std::string c = "(";
    for (auto& s : k) c += s;
    c += ")";
    code[x] = std::move(c);
    if (x != root) kids[parent[x]].push_back(code[x]);
  }
  return code[root];
}

struct LocalBall {
  RootedTree ball;
  std::uint32_t radius = 0;
  std::string code;
};

inline LocalBall make_ball(RootedTree t, std::uint32_t radius) {
  LocalBall b{std::move(t), radius, {}};
  b.code = canonical_code(b.ball.tree, b.ball.root);
  return b;
}

/// Ball of radius r around v in the tree given by edge ids of g; the root of
/// the result is vertex 0.
inline LocalBall local_ball(const MultiGraph& g, const SpanningTree& t, VertexId v, std::uint32_t r) {
  auto tg = edge_subgraph(g, t.edges);
  std::vector<std::uint32_t> dist(g.n(), kNone);
  std::vector<VertexId> local(g.n(), kNone), order{v};
  dist[v] = 0;
  local[v] = 0;
  std::vector<Edge> edges;
  for (std::size_t h = 0; h < order.size(); ++h) {
    VertexId x = order[h];
    if (dist[x] == r) continue;
    for (const auto& inc : tg.incident(x)) {
      if (dist[inc.other] != kNone) continue;
      dist[inc.other] = dist[x] + 1;
      local[inc.other] = static_cast<VertexId>(order.size());
      order.push_back(inc.other);
      edges.push_back({local[x], local[inc.other]});
    }
  }
  return make_ball(RootedTree{MultiGraph(order.size(), std::move(edges)), 0}, r);
}

inline bool rooted_isomorphic(const LocalBall& a, const LocalBall& b) { return a.code == b.code; }

/// Number of injective, root-preserving maps f from t into G with
/// u ~ v in t implying f(u) ~ f(v) in G.
inline std::uint64_t count_tree_maps(const MultiGraph& G, VertexId g_root, const RootedTree& t) {
  const auto& tt = t.tree;
  std::vector<VertexId> order{t.root}, parent(tt.n(), kNone);
  parent[t.root] = t.root;
  for (std::size_t h = 0; h < order.size(); ++h)
    for (const auto& inc : tt.incident(order[h]))
      if (parent[inc.other] == kNone) {
        parent[inc.other] = order[h];
        order.push_back(inc.other);
      }
  require(order.size() == tt.n() && tt.m() + 1 == tt.n(), ErrorKind::InvalidArgument,
          "pattern must be a tree");
  // Distinct neighbours per vertex of G.
  std::vector<std::vector<VertexId>> nbr(G.n());
  for (VertexId x = 0; x < G.n(); ++x) {
    for (const auto& inc : G.incident(x)) nbr[x].push_back(inc.other);
    std::sort(nbr[x].begin(), nbr[x].end());
    nbr[x].erase(std::unique(nbr[x].begin(), nbr[x].end()), nbr[x].end());
  }
  std::vector<VertexId> image(tt.n(), kNone);
  std::vector<char> used(G.n(), 0);
  std::uint64_t count = 0;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == order.size()) {
      ++count;
      return;
    }
    VertexId x = order[i];
    for (VertexId y : nbr[image[parent[x]]]) {
      if (used[y]) continue;
      used[y] = 1;
      image[x] = y;
      rec(i + 1);
      used[y] = 0;
    }
  };
  image[t.root] = g_root;
  used[g_root] = 1;
  rec(1);
  return count;
}

inline RootedTree path_pattern(std::size_t vertices) {
  std::vector<Edge> e;
  for (VertexId i = 0; i + 1 < vertices; ++i) e.push_back({i, i + 1});
  return {MultiGraph(vertices, std::move(e)), 0};
}

inline RootedTree star_pattern(std::size_t vertices) {
  std::vector<Edge> e;
  for (VertexId i = 1; i < vertices; ++i) e.push_back({0, i});
  return {MultiGraph(vertices, std::move(e)), 0};
}

/// Radius-r ball of the Poisson(1) tree conditioned to survive: a backbone
/// o = x_0, x_1, ... with an independent Poisson(1) Galton-Watson tree
/// hanging from every x_i. Root is vertex 0.
inline LocalBall sample_poisson_backbone_ball(std::uint32_t r, RngStream& rng) {
  require(r >= 1, ErrorKind::InvalidArgument, "radius must be >= 1");
  std::poisson_distribution<int> offspring(1.0);
  std::vector<Edge> edges;
  std::vector<std::uint32_t> depth{0};
  VertexId next = 1;
  std::vector<VertexId> frontier;
  auto add_child = [&](VertexId p) {
    VertexId c = next++;
    edges.push_back({p, c});
    depth.push_back(depth[p] + 1);
    return c;
  };
  VertexId spine = 0;
  for (std::uint32_t i = 0; i <= r; ++i) {
    if (i > 0) spine = add_child(spine);
    // Galton-Watson tree rooted at the backbone vertex.
    frontier.assign(1, spine);
    while (!frontier.empty()) {
      VertexId x = frontier.back();
      frontier.pop_back();
      int k = offspring(rng);
      if (depth[x] >= r) continue;
      for (int j = 0; j < k; ++j) frontier.push_back(add_child(x));
    }
    if (i == r) break;
  }
  // Drop vertices beyond radius r (the last backbone vertex sits at depth r).
  return make_ball(RootedTree{MultiGraph(next, std::move(edges)), 0}, r);
}

// ------------------------------------------------------ walk diagnostics

struct BottleneckProfile {
  std::vector<double> mass;  // increasing pi(S) breakpoints
  std::vector<double> phi;   // min ratio over sets with pi(S) <= mass[i]
  double pi_min = 0;

  double at(double r) const {
    r = std::min(r, 0.5);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mass.size() && mass[i] <= r * (1 + 1e-12); ++i) best = phi[i];
    return best;
  }
};

struct WalkDiagnostics {
  std::vector<double> pi;
  double D = 1;
  std::size_t t_mix = 0;
  double escaping = std::numeric_limits<double>::quiet_NaN();
  double Phi = 0;
  bool phi_exact = true;
  BottleneckProfile profile;
};

/// Lazy kernel q(u, v) = [u = v]/2 + w(u, v) / (2 w(u)).
inline Dense<double> lazy_kernel(const WeightedGraphView& wg) {
  const auto& g = wg.graph();
  auto [w, log_scale] = wg.scaled_weights();
  (void)log_scale;
  Dense<double> q(g.n());
  std::vector<Real> wv(g.n(), 0);
  for (EdgeId e = 0; e < g.m(); ++e) {
    wv[g.edge(e).tail] += w[e];
    wv[g.edge(e).head] += w[e];
  }
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto a = g.edge(e).tail, b = g.edge(e).head;
    q(a, b) += static_cast<double>(w[e] / (2 * wv[a]));
    q(b, a) += static_cast<double>(w[e] / (2 * wv[b]));
  }
  for (VertexId v = 0; v < g.n(); ++v) q(v, v) += 0.5;
  return q;
}

inline std::vector<double> stationary(const WeightedGraphView& wg) {
  const auto& g = wg.graph();
  auto [w, log_scale] = wg.scaled_weights();
  (void)log_scale;
  std::vector<Real> wv(g.n(), 0);
  Real total = 0;
  for (EdgeId e = 0; e < g.m(); ++e) {
    wv[g.edge(e).tail] += w[e];
    wv[g.edge(e).head] += w[e];
    total += 2 * w[e];
  }
  std::vector<double> pi(g.n());
  for (VertexId v = 0; v < g.n(); ++v) pi[v] = static_cast<double>(wv[v] / total);
  return pi;
}

inline Dense<double> multiply(const Dense<double>& a, const Dense<double>& b) {
  const std::size_t n = a.size();
  Dense<double> c(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      double f = ai[k];
      if (f == 0) continue;
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < n; ++j) ci[j] += f * bk[j];
    }
  }
  return c;
}

inline double uniform_distance(const Dense<double>& qt, const std::vector<double>& pi) {
  double d = 0;
  for (std::size_t u = 0; u < qt.size(); ++u)
    for (std::size_t v = 0; v < qt.size(); ++v) d = std::max(d, std::abs(qt(u, v) / pi[v] - 1));
  return d;
}

/// First t with max_{u,v} |q_t(u,v)/pi(v) - 1| <= 1/2, by doubling and then
/// bisection over stored powers (the distance is nonincreasing in t).
inline std::size_t uniform_mixing_time(const WeightedGraphView& wg, std::size_t max_t = std::size_t{1} << 40) {
  const auto& g = wg.graph();
  require(g.n() <= 4000, ErrorKind::TooLarge, "mixing time needs n <= 4000");
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  auto pi = stationary(wg);
  Dense<double> id(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) id(i, i) = 1;
  if (uniform_distance(id, pi) <= 0.5) return 0;
  std::vector<Dense<double>> pow2{lazy_kernel(wg)};
  std::size_t t = 1;
  while (uniform_distance(pow2.back(), pi) > 0.5) {
    require(t < max_t, ErrorKind::NonTermination, "mixing time beyond search limit");
    pow2.push_back(multiply(pow2.back(), pow2.back()));
    t *= 2;
  }
  if (t == 1) return 1;
  // Answer in (t/2, t]: build it bit by bit below the top power.
  std::size_t k = pow2.size() - 1;
  Dense<double> acc = pow2[k - 1];
  std::size_t base = t / 2;
  for (std::size_t j = k - 1; j-- > 0;) {
    auto trial = multiply(acc, pow2[j]);
    if (uniform_distance(trial, pi) > 0.5) {
      acc = std::move(trial);
      base += std::size_t{1} << j;
    }
  }
  return base + 1;
}

/// Phi(S) = cut(S) / (2 vol(S)); exhaustive over subsets with pi(S) <= 1/2.
inline BottleneckProfile bottleneck_profile_exact(const WeightedGraphView& wg) {
  const auto& g = wg.graph();
  const std::size_t n = g.n();
  require(n <= 24, ErrorKind::TooLarge, "exhaustive bottleneck search needs n <= 24");
  auto [w, log_scale] = wg.scaled_weights();
  (void)log_scale;
  std::vector<double> wv(n, 0);
  std::vector<std::vector<std::pair<VertexId, double>>> adj(n);
  double total = 0;
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto a = g.edge(e).tail, b = g.edge(e).head;
    double x = static_cast<double>(w[e]);
    wv[a] += x;
    wv[b] += x;
    total += 2 * x;
    adj[a].emplace_back(b, x);
    adj[b].emplace_back(a, x);
  }
  std::vector<std::pair<double, double>> pts;  // (pi(S), Phi(S))
  // Gray code walk over all nonempty subsets.
  std::vector<char> in(n, 0);
  double cut = 0, vol = 0;
  for (std::uint64_t i = 1; i < (std::uint64_t{1} << n); ++i) {
    auto v = static_cast<VertexId>(__builtin_ctzll(i));
    bool adding = !in[v];
    for (auto [u, x] : adj[v]) cut += (in[u] ? -x : x) * (adding ? 1 : -1);
    vol += adding ? wv[v] : -wv[v];
    in[v] = adding;
    double mass = vol / total;
    if (mass > 0 && mass <= 0.5 + 1e-12) pts.emplace_back(mass, std::max(0.0, cut) / (2 * vol));
  }
  std::sort(pts.begin(), pts.end());
  BottleneckProfile prof;
  prof.pi_min = *std::min_element(wv.begin(), wv.end()) / total;
  double best = std::numeric_limits<double>::infinity();
  for (auto [m, p] : pts) {
    best = std::min(best, p);
    if (!prof.mass.empty() && prof.mass.back() == m) {
      prof.phi.back() = best;
    } else {
      prof.mass.push_back(m);
      prof.phi.push_back(best);
    }
  }
  return prof;
}

/// Randomised sweep heuristic for large graphs: prefix sets of random BFS
/// orders. Only an upper bound on the true profile.
inline BottleneckProfile bottleneck_profile_sweep(const WeightedGraphView& wg, RngStream& rng,
                                                  std::size_t sweeps = 64) {
  const auto& g = wg.graph();
  const std::size_t n = g.n();
  auto [w, log_scale] = wg.scaled_weights();
  (void)log_scale;
  std::vector<double> wv(n, 0);
  double total = 0;
  for (EdgeId e = 0; e < g.m(); ++e) {
    wv[g.edge(e).tail] += static_cast<double>(w[e]);
    wv[g.edge(e).head] += static_cast<double>(w[e]);
    total += 2 * static_cast<double>(w[e]);
  }
  std::vector<std::pair<double, double>> pts;
  for (std::size_t s = 0; s < sweeps; ++s) {
    auto start = static_cast<VertexId>(rng.below(n));
    std::vector<char> in(n, 0), queued(n, 0);
    std::vector<VertexId> q{start};
    queued[start] = 1;
    double cut = 0, vol = 0;
    for (std::size_t h = 0; h < q.size(); ++h) {
      VertexId v = q[h];
      for (const auto& inc : g.incident(v)) {
        double x = static_cast<double>(w[inc.edge]);
        cut += in[inc.other] ? -x : x;
      }
      in[v] = 1;
      vol += wv[v];
      if (vol / total > 0.5) break;
      pts.emplace_back(vol / total, cut / (2 * vol));
      auto inc = g.incident(v);
      std::vector<VertexId> nb;
      for (const auto& i : inc)
        if (!queued[i.other]) nb.push_back(i.other);
      for (std::size_t i = nb.size(); i > 1; --i) std::swap(nb[i - 1], nb[rng.below(i)]);
      for (auto u : nb)
        if (!queued[u]) {
          queued[u] = 1;
          q.push_back(u);
        }
    }
  }
  std::sort(pts.begin(), pts.end());
  BottleneckProfile prof;
  prof.pi_min = *std::min_element(wv.begin(), wv.end()) / total;
  double best = std::numeric_limits<double>::infinity();
  for (auto [m, p] : pts) {
    best = std::min(best, p);
    prof.mass.push_back(m);
    prof.phi.push_back(best);
  }
  return prof;
}

/// 1 + integral over [4 pi_min, 8] of 4 / (r Phi(r)^2) dr, exact for the
/// step-function profile (Phi(r) = Phi(1/2) beyond 1/2).
inline double heat_cheeger_bound(const BottleneckProfile& prof) {
  double lo = 4 * prof.pi_min, hi = 8;
  std::vector<double> cuts{lo};
  for (double m : prof.mass)
    if (m > lo && m < hi) cuts.push_back(m);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  double s = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    if (b <= a) continue;
    double phi = prof.at(a);
    s += 4 / (phi * phi) * std::log(b / a);
  }
  return 1 + s;
}

inline WalkDiagnostics walk_diagnostics(const WeightedGraphView& wg, std::uint64_t seed = 0) {
  const auto& g = wg.graph();
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  WalkDiagnostics d;
  d.pi = stationary(wg);
  auto [lo, hi] = std::minmax_element(d.pi.begin(), d.pi.end());
  d.D = *hi / *lo;
  if (g.n() <= 24) {
    d.profile = bottleneck_profile_exact(wg);
  } else {
    RngStream rng(seed, "bottleneck-sweep");
    d.profile = bottleneck_profile_sweep(wg, rng);
    d.phi_exact = false;
  }
  d.Phi = d.profile.phi.empty() ? 0.5 : d.profile.phi.back();
  d.t_mix = uniform_mixing_time(wg);
  // Escaping sum needs every q_t up to t_mix.
  double work = static_cast<double>(d.t_mix + 1) * std::pow(static_cast<double>(g.n()), 3);
  if (work <= 2e10) {
    auto q = lazy_kernel(wg);
    Dense<double> qt(g.n());
    for (std::size_t i = 0; i < g.n(); ++i) qt(i, i) = 1;
    double s = 0;
    for (std::size_t t = 0; t <= d.t_mix; ++t) {
      double sup = 0;
      for (std::size_t v = 0; v < g.n(); ++v) sup = std::max(sup, qt(v, v));
      s += static_cast<double>(t + 1) * sup;
      if (t < d.t_mix) qt = multiply(qt, q);
    }
    d.escaping = s;
  }
  return d;
}

// ------------------------------------------------- derivative identities

struct DerivativeReport {
  double beta_residual = 0;   // |d/dbeta log Z + E[H]|
  double beta_tolerance = 0;
  double omega_residual = 0;  // max over (e, f) of the omega-derivative mismatch
  double omega_tolerance = 0;
  bool passed = true;
};

namespace detail {
inline double log_partition_from(const std::vector<double>& H, double beta) {
  double top = -std::numeric_limits<double>::infinity();
  for (double h : H) top = std::max(top, -beta * h);
  double s = 0;
  for (double h : H) s += std::exp(-beta * h - top);
  return top + std::log(s);
}
}  // namespace detail

/// Central differences with step h against d/dbeta log Z = -E[H] and
/// d/domega_f P(e) = beta (P(e) P(f) - P(e, f)). Tolerance 10 h^2 scale, with
/// scale max(1, R^3) (R the spread of H over trees) for beta and
/// max(1, beta^3) for omega.
inline DerivativeReport derivative_residuals(const WeightedGraphView& wg, double h,
                                             std::size_t cap = 100'000) {
  auto law = exact_tree_law(wg, cap);
  const double beta = wg.beta();
  DerivativeReport r;
  double mean_h = 0;
  for (std::size_t i = 0; i < law.trees.size(); ++i) mean_h += law.prob[i] * law.hamiltonian[i];
  double fd = (detail::log_partition_from(law.hamiltonian, beta + h) -
               detail::log_partition_from(law.hamiltonian, beta - h)) / (2 * h);
  r.beta_residual = std::abs(fd + mean_h);
  auto [hmin, hmax] = std::minmax_element(law.hamiltonian.begin(), law.hamiltonian.end());
  double range = *hmax - *hmin;
  r.beta_tolerance = 10 * h * h * std::max(1.0, range * range * range);

  const std::size_t m = wg.m();
  auto p = law.marginals(m);
  // joint[e][f] = P(e, f in T)
  std::vector<double> joint(m * m, 0);
  for (std::size_t i = 0; i < law.trees.size(); ++i)
    for (EdgeId e : law.trees[i].edges)
      for (EdgeId f : law.trees[i].edges) joint[e * m + f] += law.prob[i];
  auto marginals_at = [&](EdgeId f, double shift) {
    std::vector<double> lw(law.trees.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < law.trees.size(); ++i) {
      double hh = law.hamiltonian[i];
      if (std::binary_search(law.trees[i].edges.begin(), law.trees[i].edges.end(), f)) hh += shift;
      lw[i] = -beta * hh;
      top = std::max(top, lw[i]);
    }
    double s = 0;
    for (double x : lw) s += std::exp(x - top);
    std::vector<double> q(m, 0);
    for (std::size_t i = 0; i < law.trees.size(); ++i) {
      double pr = std::exp(lw[i] - top) / s;
      for (EdgeId e : law.trees[i].edges) q[e] += pr;
    }
    return q;
  };
  for (EdgeId f = 0; f < m; ++f) {
    auto plus = marginals_at(f, h), minus = marginals_at(f, -h);
    for (EdgeId e = 0; e < m; ++e) {
      double numeric = (plus[e] - minus[e]) / (2 * h);
      double exact = beta * (p[e] * p[f] - joint[e * m + f]);
      r.omega_residual = std::max(r.omega_residual, std::abs(numeric - exact));
    }
  }
  r.omega_tolerance = 10 * h * h * std::max(1.0, beta * beta * beta);
  r.passed = r.beta_residual <= r.beta_tolerance && r.omega_residual <= r.omega_tolerance;
  return r;
}

inline DerivativeReport derivative_checks(const WeightedGraphView& wg, double h, std::size_t cap = 100'000) {
  auto r = derivative_residuals(wg, h, cap);
  if (!r.passed)
    fail(ErrorKind::CheckFailed, "derivative identities: beta residual " + std::to_string(r.beta_residual) +
                                     " (tol " + std::to_string(r.beta_tolerance) + "), omega residual " +
                                     std::to_string(r.omega_residual) + " (tol " +
                                     std::to_string(r.omega_tolerance) + ")");
  return r;
}

// --------------------------------------------------------------- bumping

/// Diameter of every tree of a law.
inline std::vector<std::uint32_t> tree_diameters(const MultiGraph& g, const TreeLaw& law) {
  std::vector<std::uint32_t> d;
  d.reserve(law.trees.size());
  for (const auto& t : law.trees) d.push_back(tree_diameter(g, t));
  return d;
}

inline double prob_diameter_at_most(const TreeLaw& law, const std::vector<std::uint32_t>& diam,
                                    std::uint32_t D) {
  double s = 0;
  for (std::size_t i = 0; i < law.prob.size(); ++i)
    if (diam[i] <= D) s += law.prob[i];
  return s;
}

struct BumpResult {
  double lambda1 = 0;  // P(diam <= D | e in T)
  double lambda2 = 0;  // P(diam <= D | e not in T)
  double before = 0;   // P(diam <= D)
  double after = 0;
  double new_omega = 0;
  bool ill_posed = false;  // one conditioning event has probability zero
  bool holds = true;       // after <= before
};

/// Moves omega_e to a1 when lambda1 <= lambda2, else to a2, and checks that
/// P(diam <= D) did not increase.
inline BumpResult bump_step_verify(const WeightedGraphView& wg, EdgeId e, double a1, double a2,
                                   std::uint32_t D, std::size_t cap = 100'000) {
  require(a1 <= wg.omega(e) && wg.omega(e) <= a2, ErrorKind::InvalidArgument,
          "need a1 <= omega_e <= a2");
  auto law = exact_tree_law(wg, cap);
  auto diam = tree_diameters(wg.graph(), law);
  BumpResult r;
  double pin = 0, din = 0, dout = 0;
  for (std::size_t i = 0; i < law.trees.size(); ++i) {
    bool has = std::binary_search(law.trees[i].edges.begin(), law.trees[i].edges.end(), e);
    bool ok = diam[i] <= D;
    if (has) {
      pin += law.prob[i];
      if (ok) din += law.prob[i];
    } else if (ok) {
      dout += law.prob[i];
    }
  }
  r.before = din + dout;
  // Under the spatial Markov property both conditionals are free of omega_e.
  r.ill_posed = pin <= 0 || pin >= 1;
  r.lambda1 = pin > 0 ? din / pin : 0;
  r.lambda2 = pin < 1 ? dout / (1 - pin) : 0;
  r.new_omega = r.ill_posed ? a1 : (r.lambda1 <= r.lambda2 ? a1 : a2);
  auto om = wg.omega();
  om[e] = r.new_omega;
  auto law2 = exact_tree_law(wg.with_omega(om), cap);
  r.after = prob_diameter_at_most(law2, tree_diameters(wg.graph(), law2), D);
  r.holds = r.after <= r.before + 1e-12;
  return r;
}

// ------------------------------------------------------ total variation

inline double tv_distance(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), ErrorKind::InvalidArgument, "laws have different supports");
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// TV between two laws on spanning trees of the same graph, matched by edge set.
inline double tv_distance(const TreeLaw& a, const TreeLaw& b) {
  std::map<SpanningTree, std::pair<double, double>> joint;
  for (std::size_t i = 0; i < a.trees.size(); ++i) joint[a.trees[i]].first += a.prob[i];
  for (std::size_t i = 0; i < b.trees.size(); ++i) joint[b.trees[i]].second += b.prob[i];
  double s = 0;
  for (const auto& [t, pq] : joint) s += std::abs(pq.first - pq.second);
  return 0.5 * s;
}

// -------------------------------------------------------- MST equality

enum class SamplerKind { Auto, Wilson, AldousBroder, Exact, GapRestricted };

/// Spread beta * (max omega - min omega) above which Auto leaves Wilson.
inline constexpr double kWilsonSpreadLimit = 60;

inline SpanningTree sample_tree(const WeightedGraphView& wg, RngStream& rng,
                                SamplerKind kind = SamplerKind::Auto) {
  if (kind == SamplerKind::Auto) {
    double spread = 0;
    if (wg.m() > 0) {
      auto [lo, hi] = std::minmax_element(wg.omega().begin(), wg.omega().end());
      spread = wg.beta() * (*hi - *lo);
    }
    kind = spread <= kWilsonSpreadLimit ? SamplerKind::Wilson : SamplerKind::GapRestricted;
  }
  switch (kind) {
    case SamplerKind::Wilson: return wilson_sample(wg, 0, {}, rng);
    case SamplerKind::AldousBroder: return aldous_broder_sample(wg, 0, rng);
    case SamplerKind::Exact: return kirchhoff_sequential_sample(wg, rng);
    default: return gap_restricted_sample(wg, rng).tree;
  }
}

/// Same dispatch on an implicit complete graph; edge ids are complete_edge_id.
inline SpanningTree sample_tree(const ImplicitCompleteNetwork& net, RngStream& rng,
                                SamplerKind kind = SamplerKind::Auto) {
  if (kind == SamplerKind::Auto) {
    double hi = 1, lo = 0;
    if (const auto* b = std::get_if<Bounded>(&net.law())) {
      lo = b->a;
      hi = b->b;
    } else if (!std::holds_alternative<Uniform01>(net.law())) {
      hi = std::numeric_limits<double>::infinity();
    }
    kind = net.beta() * (hi - lo) <= kWilsonSpreadLimit ? SamplerKind::Wilson : SamplerKind::GapRestricted;
  }
  switch (kind) {
    case SamplerKind::Wilson: return wilson_sample(net, rng);
    case SamplerKind::AldousBroder: return aldous_broder_sample(net, 0, rng);
    case SamplerKind::GapRestricted: return gap_restricted_sample(net, rng).tree;
    default: fail(ErrorKind::Unsupported, "exact sampler needs an explicit graph");
  }
}

/// The tree as a graph on the n vertices of the implicit complete graph.
inline MultiGraph complete_tree_graph(const ImplicitCompleteNetwork& net, const SpanningTree& t) {
  std::vector<Edge> edges;
  edges.reserve(t.edges.size());
  for (EdgeId e : t.edges) edges.push_back(net.endpoints(e));
  return MultiGraph(net.n(), std::move(edges));
}

/// Frequency of {sampled tree = MST} over fresh instances; instance i is
/// built by `family(i)` and sampled with stream ("mst-equality", i).
inline Estimate mst_equality_probability(const std::function<WeightedGraphView(std::size_t)>& family,
                                         std::size_t replicas, std::uint64_t seed,
                                         SamplerKind kind = SamplerKind::Auto) {
  std::vector<double> hit(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    auto wg = family(i);
    RngStream rng(seed, "mst-equality", i);
    auto t = sample_tree(wg, rng, kind);
    hit[i] = t == kruskal_mst(wg.graph(), wg.omega()).tree ? 1.0 : 0.0;
  }
  return mean_stderr(hit);
}

}  // namespace rstre
