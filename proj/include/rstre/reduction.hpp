#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "electric.hpp"
#include "environment.hpp"
#include "graph.hpp"
#include "kernel.hpp"
#include "rng.hpp"
#include "sampler.hpp"
#include "stats.hpp"

namespace rstre {

// ------------------------------------------------------ kernel coupling

struct KernelCouplingReport {
  double marginal_error = 0;    // max_k |P_K(k in T) - P_G(phi(k) in T)|
  double law_error = 0;         // max over kernel trees of the pushforward mismatch
  double resistance_error = 0;  // max relative R_eff mismatch between kernel vertices
  std::size_t worst_edge = kNone;
  std::size_t kernel_edges = 0;
  bool passed = true;
};

/// Compares the exact law on G with the exact law on its kernel under the
/// series weights: every G-tree must map to a kernel tree by
/// T -> {k : phi(k) in T}, and the pushforward must equal the kernel law.
inline KernelCouplingReport kernel_coupling_residuals(const WeightedGraphView& wg, double tol = 1e-9,
                                                      std::size_t cap = 1'000'000) {
  const auto& g = wg.graph();
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  auto kd = kernel_decompose(wg);
  KernelCouplingReport r;
  r.kernel_edges = kd.kernel.m();
  if (kd.kernel.m() == 0) return r;
  auto kview = kd.view();
  auto klaw = exact_tree_law(kview, cap);
  auto glaw = exact_tree_law(wg, cap);

  std::vector<double> push(klaw.trees.size(), 0), kmarg(kd.kernel.m(), 0);
  std::vector<char> in_tree(g.m(), 0);
  for (std::size_t i = 0; i < glaw.trees.size(); ++i) {
    for (EdgeId e : glaw.trees[i].edges) in_tree[e] = 1;
    SpanningTree kt;
    for (std::size_t k = 0; k < kd.phi.size(); ++k) {
      bool all = std::all_of(kd.phi[k].begin(), kd.phi[k].end(), [&](EdgeId e) { return in_tree[e]; });
      if (all) kt.edges.push_back(static_cast<EdgeId>(k));
    }
    for (EdgeId e : glaw.trees[i].edges) in_tree[e] = 0;
    auto idx = klaw.index_of(kt);
    if (idx == kNone) {
      r.law_error = 1;
      r.passed = false;
      continue;
    }
    push[idx] += glaw.prob[i];
    for (EdgeId k : kt.edges) kmarg[k] += glaw.prob[i];
  }
  for (std::size_t j = 0; j < push.size(); ++j)
    r.law_error = std::max(r.law_error, std::abs(push[j] - klaw.prob[j]));
  auto pk = klaw.marginals(kd.kernel.m());
  for (std::size_t k = 0; k < pk.size(); ++k) {
    double d = std::abs(pk[k] - kmarg[k]);
    if (r.worst_edge == kNone || d > r.marginal_error) {
      r.marginal_error = d;
      r.worst_edge = k;
    }
  }
  const auto& kv = kd.kernel_vertices;
  for (std::size_t a = 0; a < kv.size(); ++a)
    for (std::size_t b = a + 1; b < kv.size(); ++b) {
      double rg = effective_resistance(wg, kv[a], kv[b]);
      double rk = effective_resistance(kview, static_cast<VertexId>(a), static_cast<VertexId>(b));
      r.resistance_error = std::max(r.resistance_error, std::abs(rg - rk) / std::max(1.0, std::abs(rg)));
    }
  r.passed = r.passed && r.marginal_error <= tol && r.law_error <= tol && r.resistance_error <= tol;
  return r;
}

inline KernelCouplingReport kernel_coupling_check(const WeightedGraphView& wg, double tol = 1e-9,
                                                  std::size_t cap = 1'000'000) {
  auto r = kernel_coupling_residuals(wg, tol, cap);
  if (!r.passed)
    fail(ErrorKind::CheckFailed, "kernel coupling mismatch: marginal " + std::to_string(r.marginal_error) +
                                     " at kernel edge " + std::to_string(r.worst_edge) + ", law " +
                                     std::to_string(r.law_error) + ", resistance " +
                                     std::to_string(r.resistance_error));
  return r;
}

/// Kernel edge list (omega = -log w_hat, beta = 1), two-core edge list with
/// original disorder, and the phi map "k: e1,e2,...".
inline void export_kernel(const KernelDecomposition& kd, const std::vector<double>* omega,
                          const std::string& prefix) {
  auto open = [&](const std::string& path) {
    std::ofstream f(path);
    require(f.good(), ErrorKind::Io, "cannot write " + path);
    return f;
  };
  {
    auto f = open(prefix + ".kernel.edges");
    std::vector<double> om(kd.log_weight.size());
    for (std::size_t k = 0; k < om.size(); ++k) om[k] = -kd.log_weight[k];
    write_edge_list(f, kd.kernel, &om);
  }
  {
    auto f = open(prefix + ".core.edges");
    std::vector<double> om;
    if (omega)
      for (EdgeId e : kd.core.edges) om.push_back((*omega)[e]);
    write_edge_list(f, kd.core.graph, omega ? &om : nullptr);
  }
  {
    auto f = open(prefix + ".phi");
    for (std::size_t k = 0; k < kd.phi.size(); ++k) {
      f << k << ':';
      for (std::size_t i = 0; i < kd.phi[k].size(); ++i) f << (i ? "," : " ") << kd.phi[k][i];
      f << '\n';
    }
  }
}

// -------------------------------------------------- contiguous giant model

/// The conjugate mu < 1 of 1 + eps: mu e^{-mu} = (1 + eps) e^{-(1 + eps)}.
inline double conjugate_parameter(double eps) {
  require(eps >= 0 && std::isfinite(eps), ErrorKind::InvalidArgument, "eps must be >= 0");
  if (eps == 0) return 1;
  const double target = (1 + eps) * std::exp(-(1 + eps));
  double lo = 0, hi = 1;  // x e^{-x} is increasing on [0, 1]
  for (int i = 0; i < 200 && hi - lo > 0; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (mid * std::exp(-mid) < target ? lo : hi) = mid;
  }
  double a = lo * std::exp(-lo) - target, b = hi * std::exp(-hi) - target;
  return std::abs(a) <= std::abs(b) ? lo : hi;
}

struct ContiguousModelParams {
  std::size_t n = 0;
  double eps = 0;
  double mu_star = 1;
  double Lambda = 0;
  std::vector<std::uint32_t> degrees;           // D_u for u < n
  std::map<std::uint32_t, std::size_t> counts;  // N_k for k >= 3
  double path_parameter = 0;                    // 1 - mu_star
  std::vector<std::uint32_t> path_lengths;      // one per kernel edge
  std::size_t parity_tries = 0;
  bool multigraph = false;  // simplicity budget ran out
  bool small_warning = false;  // eps^3 n < 5
};

struct ContiguousGiant {
  MultiGraph graph;
  ContiguousModelParams params;
  std::size_t kernel_vertices = 0;
  std::size_t core_vertices = 0;
};

/// Kernel from a configuration model on the vertices with D_u >= 3, each
/// kernel edge replaced by a path of Geom(1 - mu) edges, and an independent
/// Poisson(mu) Galton-Watson tree attached to every vertex.
inline ContiguousGiant sample_contiguous_giant(std::size_t n, double eps, RngStream& rng,
                                               std::size_t simple_budget = 100) {
  require(n >= 1 && eps > 0, ErrorKind::InvalidArgument, "need n >= 1 and eps > 0");
  ContiguousGiant out;
  auto& P = out.params;
  P.n = n;
  P.eps = eps;
  P.mu_star = conjugate_parameter(eps);
  P.path_parameter = 1 - P.mu_star;
  P.small_warning = eps * eps * eps * static_cast<double>(n) < 5;
  std::normal_distribution<double> normal(1 + eps - P.mu_star, std::sqrt(1 / (eps * static_cast<double>(n))));
  P.Lambda = std::max(0.0, normal(rng));

  std::vector<VertexId> stubs_owner;
  for (;;) {
    ++P.parity_tries;
    require(P.parity_tries <= 10'000, ErrorKind::RetryExhausted, "degree parity conditioning failed");
    P.degrees.assign(n, 0);
    std::poisson_distribution<std::uint32_t> pois(P.Lambda);
    std::uint64_t total = 0;
    for (auto& d : P.degrees) {
      d = P.Lambda > 0 ? pois(rng) : 0;
      if (d >= 3) total += d;
    }
    if (total % 2 == 0) break;
  }
  P.counts.clear();
  std::vector<VertexId> kernel_id(n, kNone);
  std::size_t K = 0;
  for (std::size_t u = 0; u < n; ++u)
    if (P.degrees[u] >= 3) {
      ++P.counts[P.degrees[u]];
      kernel_id[u] = static_cast<VertexId>(K++);
      for (std::uint32_t j = 0; j < P.degrees[u]; ++j) stubs_owner.push_back(kernel_id[u]);
    }
  out.kernel_vertices = K;

  // Uniform pairing; retry for a simple kernel within the budget.
  std::vector<std::pair<VertexId, VertexId>> pairs;
  for (std::size_t attempt = 0;; ++attempt) {
    auto s = stubs_owner;
    std::shuffle(s.begin(), s.end(), rng);
    pairs.clear();
    bool simple = true;
    std::vector<std::pair<VertexId, VertexId>> seen;
    for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
      auto a = std::min(s[i], s[i + 1]), b = std::max(s[i], s[i + 1]);
      if (a == b) simple = false;
      pairs.emplace_back(a, b);
    }
    if (simple) {
      seen = pairs;
      std::sort(seen.begin(), seen.end());
      simple = std::adjacent_find(seen.begin(), seen.end()) == seen.end();
    }
    if (simple) break;
    if (attempt + 1 >= simple_budget) {
      P.multigraph = true;
      break;
    }
  }

  std::geometric_distribution<std::uint32_t> geom(P.path_parameter);
  std::vector<Edge> edges;
  VertexId next = static_cast<VertexId>(K);
  for (auto [a, b] : pairs) {
    std::uint32_t len = 1 + geom(rng);
    // A loop needs an interior vertex to be representable.
    if (a == b && len < 2) len = 2;
    P.path_lengths.push_back(len);
    VertexId prev = a;
    for (std::uint32_t j = 1; j < len; ++j) {
      edges.push_back({prev, next});
      prev = next++;
    }
    edges.push_back({prev, b});
  }
  out.core_vertices = next;

  std::poisson_distribution<std::uint32_t> offspring(P.mu_star);
  const double cap = 50 * std::log(std::max<double>(static_cast<double>(n), 2.0));
  const std::size_t core = next;
  std::vector<std::pair<VertexId, std::uint32_t>> frontier;
  for (VertexId v = 0; v < core; ++v) {
    frontier.assign(1, {v, 0});
    while (!frontier.empty()) {
      auto [x, depth] = frontier.back();
      frontier.pop_back();
      std::uint32_t k = offspring(rng);
      if (k > 0 && depth + 1 > cap)
        fail(ErrorKind::NonTermination, "Galton-Watson tree exceeded depth cap");
      for (std::uint32_t j = 0; j < k; ++j) {
        edges.push_back({x, next});
        frontier.push_back({next++, depth + 1});
      }
    }
  }
  std::vector<Edge> fixed;
  fixed.reserve(edges.size());
  for (auto e : edges) fixed.push_back({std::min(e.tail, e.head), std::max(e.tail, e.head)});
  out.graph = MultiGraph(next, std::move(fixed));
  return out;
}

struct SnapshotSchedule {
  double g0 = 1;
  double eps = 0;
  std::size_t n = 0;

  double g(std::size_t i) const { return std::pow(1.25, 0.5 * static_cast<double>(i)) * g0; }
  double p(std::size_t i) const { return (1 + g(i) * eps) / static_cast<double>(n); }
  /// First i with g_i eps >= 1 / log n.
  std::size_t m() const {
    double target = 1 / std::log(static_cast<double>(n));
    std::size_t i = 0;
    while (g(i) * eps < target) ++i;
    return i;
  }
};

inline SnapshotSchedule make_schedule(double g0, double eps, std::size_t n) {
  require(g0 > 0 && eps > 0 && n >= 3, ErrorKind::InvalidArgument, "need g0 > 0, eps > 0, n >= 3");
  return {g0, eps, n};
}

// ------------------------------------------------- kernel weight samples

struct KernelWeightSample {
  std::uint32_t L = 0;
  double M_L = 0;
  double w_hat = 0;
};

struct KernelWeightReport {
  std::vector<KernelWeightSample> samples;
  double lower_violations = 0;  // fraction with w_hat < e^{-beta p1 M_L}
  double upper_holds = 0;       // fraction with w_hat <= C e^{-beta p1 M_L} log n
  std::vector<double> quantiles;  // w_hat at levels 0.1, 0.25, 0.5, 0.75, 0.9
};

/// Samples w_hat = sum_{k <= L} e^{-beta p1 U_k}, L ~ Geom(1 - mu).
inline KernelWeightReport kernel_weight_law_stats(double beta, double p1, double mu_star, std::size_t samples,
                                                  RngStream& rng, std::size_t n, double C = 64) {
  require(mu_star >= 0 && mu_star < 1, ErrorKind::InvalidArgument, "need 0 <= mu < 1");
  KernelWeightReport r;
  std::geometric_distribution<std::uint32_t> geom(1 - mu_star);
  std::size_t low_bad = 0, up_ok = 0;
  const double logn = std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
  std::vector<double> w;
  for (std::size_t i = 0; i < samples; ++i) {
    KernelWeightSample s;
    s.L = 1 + geom(rng);
    s.M_L = 1;
    double sum = 0;
    for (std::uint32_t k = 0; k < s.L; ++k) {
      double u = rng.uniform();
      s.M_L = std::min(s.M_L, u);
      sum += std::exp(-beta * p1 * u);
    }
    s.w_hat = sum;
    double base = std::exp(-beta * p1 * s.M_L);
    if (s.w_hat < base * (1 - 1e-12)) ++low_bad;
    if (s.w_hat <= C * base * logn) ++up_ok;
    w.push_back(s.w_hat);
    r.samples.push_back(s);
  }
  if (samples > 0) {
    r.lower_violations = static_cast<double>(low_bad) / static_cast<double>(samples);
    r.upper_holds = static_cast<double>(up_ok) / static_cast<double>(samples);
    std::sort(w.begin(), w.end());
    for (double q : {0.1, 0.25, 0.5, 0.75, 0.9})
      r.quantiles.push_back(w[std::min(w.size() - 1, static_cast<std::size_t>(q * static_cast<double>(w.size())))]);
  }
  return r;
}

// ------------------------------------------------ percolation coupling

/// Vertices of the largest p-open cluster (ties to the smallest vertex id).
inline std::vector<VertexId> giant_cluster(const MultiGraph& g, const std::vector<double>& omega,
                                           const DisorderLaw& law, double p) {
  auto open = open_subgraph(g, omega, law, p);
  auto census = connected_components(open.graph);
  std::vector<VertexId> out;
  for (VertexId v = 0; v < g.n(); ++v)
    if (census.component[v] == 0) out.push_back(v);
  return out;
}

inline bool contains_all(std::span<const VertexId> outer, std::span<const VertexId> inner) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

struct TvRestricted {
  double tv = 0;
  double bound = 0;  // n^4 e^{-beta (p1 - p0)}
  std::size_t support = 0;
};

/// Exact laws of the minimal subtree spanning C1(p0) under the Gibbs measure
/// on G and under the Gibbs measure on C1(p1) (its vertices and p1-open edges).
inline TvRestricted tv_restricted_laws(const MultiGraph& g, const std::vector<double>& omega, double beta,
                                       const DisorderLaw& law, double p0, double p1,
                                       std::size_t cap = 1'000'000) {
  require(p0 <= p1, ErrorKind::InvalidArgument, "need p0 <= p1");
  auto A = giant_cluster(g, omega, law, p0);
  auto B = giant_cluster(g, omega, law, p1);
  require(contains_all(B, A), ErrorKind::PreconditionFailed, "C1(p0) is not contained in C1(p1)");

  WeightedGraphView wg(g, omega, beta);
  auto full = exact_tree_law(wg, cap);
  std::map<std::vector<EdgeId>, std::pair<double, double>> joint;
  for (std::size_t i = 0; i < full.trees.size(); ++i)
    joint[restricted_subtree(g, full.trees[i].edges, A)].first += full.prob[i];

  // Cluster graph on B with p1-open edges.
  double threshold = inverse_cdf(law, p1);
  std::vector<VertexId> local(g.n(), kNone);
  for (std::size_t i = 0; i < B.size(); ++i) local[B[i]] = static_cast<VertexId>(i);
  std::vector<Edge> ce;
  std::vector<EdgeId> orig;
  std::vector<double> com;
  for (EdgeId e = 0; e < g.m(); ++e) {
    auto [a, b] = g.edge(e);
    if (local[a] == kNone || local[b] == kNone || omega[e] > threshold) continue;
    ce.push_back({local[a], local[b]});
    orig.push_back(e);
    com.push_back(omega[e]);
  }
  MultiGraph cg(B.size(), std::move(ce));
  auto claw = exact_tree_law(WeightedGraphView(cg, com, beta), cap);
  for (std::size_t i = 0; i < claw.trees.size(); ++i) {
    std::vector<EdgeId> mapped;
    for (EdgeId e : claw.trees[i].edges) mapped.push_back(orig[e]);
    std::sort(mapped.begin(), mapped.end());
    joint[restricted_subtree(g, mapped, A)].second += claw.prob[i];
  }
  TvRestricted r;
  for (const auto& [t, pq] : joint) r.tv += std::abs(pq.first - pq.second);
  r.tv *= 0.5;
  r.support = joint.size();
  double nn = static_cast<double>(g.n());
  r.bound = nn * nn * nn * nn * std::exp(-beta * (p1 - p0));
  return r;
}

/// Bernoulli(p) bond percolation, edge e kept iff U_e < p on stream `rng`.
inline OpenSubgraph percolate(const MultiGraph& g, double p, RngStream& rng) {
  OpenSubgraph out;
  for (EdgeId e = 0; e < g.m(); ++e)
    if (rng.uniform() < p) out.edges.push_back(e);
  out.graph = edge_subgraph(g, out.edges);
  return out;
}

/// Cluster size C k log n beyond which percolation at p = (1 - s)/(Delta - 1)
/// on a max-degree-Delta graph fails with probability <= n^{-k}; here
/// C k = (2k + 4) / I(1 - s) with I(a) = a - 1 - log a.
inline double subcritical_cluster_threshold(double s, double k, std::size_t n) {
  require(s > 0 && s <= 1 && k >= 1, ErrorKind::InvalidArgument, "need 0 < s <= 1 and k >= 1");
  double a = 1 - s;
  double I = a > 0 ? a - 1 - std::log(a) : std::numeric_limits<double>::infinity();
  return (2 * k + 4) / I * std::log(static_cast<double>(n));
}

inline std::size_t max_degree(const MultiGraph& g, std::span<const EdgeId> edges) {
  std::vector<std::size_t> deg(g.n(), 0);
  for (EdgeId e : edges) {
    ++deg[g.edge(e).tail];
    ++deg[g.edge(e).head];
  }
  return deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
}

}  // namespace rstre
