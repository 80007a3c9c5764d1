#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "electric.hpp"
#include "environment.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "kernel.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace rstre {

inline constexpr std::uint64_t kDefaultStepCap = 1'000'000'000ULL;

struct WalkStep {
  EdgeId edge;
  VertexId to;
};

/// Neighbour sampling proportional to edge weight, one Walker alias table per
/// vertex. Weights are normalised per vertex, so huge global ranges are fine.
class AliasNetwork {
 public:
  explicit AliasNetwork(const WeightedGraphView& wg) : g_(wg.graph_ptr()) {
    const auto& g = *g_;
    offset_.assign(g.n() + 1, 0);
    for (VertexId v = 0; v < g.n(); ++v) offset_[v + 1] = offset_[v] + g.degree(v);
    prob_.resize(offset_.back());
    alias_.resize(offset_.back());
    std::vector<double> w;
    std::vector<std::uint32_t> small, large;
    for (VertexId v = 0; v < g.n(); ++v) {
      auto inc = g.incident(v);
      const std::size_t k = inc.size();
      if (k == 0) continue;
      double top = -std::numeric_limits<double>::infinity();
      for (const auto& i : inc) top = std::max(top, wg.log_weight(i.edge));
      w.assign(k, 0);
      double total = 0;
      for (std::size_t j = 0; j < k; ++j) total += w[j] = std::exp(wg.log_weight(inc[j].edge) - top);
      small.clear();
      large.clear();
      for (std::size_t j = 0; j < k; ++j) {
        w[j] = w[j] * static_cast<double>(k) / total;
        (w[j] < 1 ? small : large).push_back(static_cast<std::uint32_t>(j));
      }
      double* pv = prob_.data() + offset_[v];
      std::uint32_t* av = alias_.data() + offset_[v];
      while (!small.empty() && !large.empty()) {
        auto s = small.back();
        small.pop_back();
        auto l = large.back();
        pv[s] = w[s];
        av[s] = l;
        w[l] = (w[l] + w[s]) - 1;
        if (w[l] < 1) {
          large.pop_back();
          small.push_back(l);
        }
      }
      for (auto j : large) pv[j] = 1, av[j] = j;
      for (auto j : small) pv[j] = 1, av[j] = j;
    }
  }

  std::size_t n() const { return g_->n(); }
  const MultiGraph& graph() const { return *g_; }

  WalkStep step(VertexId u, RngStream& rng) const {
    auto inc = g_->incident(u);
    auto j = static_cast<std::uint32_t>(rng.below(inc.size()));
    if (rng.uniform() >= prob_[offset_[u] + j]) j = alias_[offset_[u] + j];
    return {inc[j].edge, inc[j].other};
  }

 private:
  std::shared_ptr<const MultiGraph> g_;
  std::vector<std::size_t> offset_;
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// K_n whose disorder is generated on demand from (law, seed): edge (u, v)
/// carries omega_at(law, seed, complete_edge_id(n, u, v)), the same value
/// sample_environment gives build_complete(n). Steps use rejection: propose a
/// uniform neighbour, accept with probability exp(-beta (omega - floor)).
class ImplicitCompleteNetwork {
 public:
  ImplicitCompleteNetwork(std::size_t n, DisorderLaw law, std::uint64_t seed, double beta)
      : n_(n), law_(std::move(law)), seed_(seed), beta_(beta) {
    require(n >= 2, ErrorKind::InvalidArgument, "implicit complete graph needs n >= 2");
    if (std::holds_alternative<Uniform01>(law_) || std::holds_alternative<PowerTail>(law_)) {
      floor_ = 0;
    } else if (const auto* b = std::get_if<Bounded>(&law_)) {
      floor_ = b->a;
    } else {
      fail(ErrorKind::Unsupported, "implicit network needs a law bounded below");
    }
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return n_ * (n_ - 1) / 2; }
  double beta() const { return beta_; }
  const DisorderLaw& law() const { return law_; }
  std::uint64_t seed() const { return seed_; }

  double omega(VertexId u, VertexId v) const {
    return omega_at(law_, seed_, complete_edge_id(n_, u, v));
  }

  Edge endpoints(EdgeId e) const {
    // Invert complete_edge_id by scanning row starts; rows are contiguous.
    std::uint64_t lo = 0, hi = n_ - 1;
    while (lo < hi) {
      std::uint64_t mid = (lo + hi + 1) / 2;
      if (complete_edge_id(n_, mid, mid + 1) <= e) lo = mid; else hi = mid - 1;
    }
    auto u = static_cast<VertexId>(lo);
    auto v = static_cast<VertexId>(e - complete_edge_id(n_, u, u + 1) + u + 1);
    return {u, v};
  }

  WalkStep step(VertexId u, RngStream& rng) const {
    for (;;) {
      auto v = static_cast<VertexId>(rng.below(n_ - 1));
      if (v >= u) ++v;
      auto id = complete_edge_id(n_, u, v);
      double om = omega_at(law_, seed_, id);
      double accept = beta_ == 0 ? 1.0 : std::exp(-beta_ * (om - floor_));
      if (rng.uniform() < accept) return {static_cast<EdgeId>(id), v};
    }
  }

  /// Materialised graph and disorder (for cross-checks at small n).
  std::pair<MultiGraph, std::vector<double>> materialize() const {
    auto g = build_complete(n_);
    return {g, sample_environment(law_, g, seed_).omega};
  }

 private:
  std::size_t n_;
  DisorderLaw law_;
  std::uint64_t seed_;
  double beta_;
  double floor_ = 0;
};

// ------------------------------------------------------------------ walks

struct WalkPath {
  std::vector<VertexId> vertices;
};

/// Lazy walk: hold with probability 1/2, else move along an edge chosen
/// proportionally to its weight. Stops when `stop(vertex)` holds.
inline WalkPath lazy_random_walk(const AliasNetwork& net, VertexId start,
                                 const std::function<bool(VertexId)>& stop, RngStream& rng,
                                 std::uint64_t step_cap = kDefaultStepCap) {
  WalkPath path{{start}};
  VertexId x = start;
  for (std::uint64_t t = 0; !stop(x); ++t) {
    require(t < step_cap, ErrorKind::NonTermination, "lazy walk exceeded its step cap");
    if (!rng.bernoulli(0.5)) x = net.step(x, rng).to;
    path.vertices.push_back(x);
  }
  return path;
}

/// Chronological loop erasure: keep X_0, jump past its last visit, keep the
/// vertex there, and so on.
inline WalkPath loop_erase(const WalkPath& path) {
  require(!path.vertices.empty(), ErrorKind::InvalidArgument, "empty path");
  const auto& x = path.vertices;
  std::unordered_map<VertexId, std::size_t> last;
  for (std::size_t i = 0; i < x.size(); ++i) last[x[i]] = i;
  WalkPath out;
  for (std::size_t i = 0; i < x.size(); i = last[x[i]] + 1) out.vertices.push_back(x[i]);
  return out;
}

// ---------------------------------------------------------------- Wilson

/// Wilson's algorithm. Walks start from the vertices in `order` that are not
/// yet in the tree; loops are erased by keeping only the last exit of every
/// vertex (the successor pointers), which equals chronological erasure.
template <class Network>
SpanningTree wilson_sample(const Network& net, VertexId root, std::span<const VertexId> order,
                           RngStream& rng, std::uint64_t step_cap = kDefaultStepCap) {
  const std::size_t n = net.n();
  require(root < n, ErrorKind::InvalidArgument, "root out of range");
  std::vector<char> in_tree(n, 0);
  std::vector<WalkStep> next(n, WalkStep{kNone, kNone});
  in_tree[root] = 1;
  std::uint64_t steps = 0;
  std::vector<EdgeId> edges;
  edges.reserve(n - 1);
  auto run_from = [&](VertexId s) {
    for (VertexId x = s; !in_tree[x]; x = next[x].to) {
      next[x] = net.step(x, rng);
      if (++steps > step_cap)
        fail(ErrorKind::NonTermination,
             "Wilson walk exceeded its step cap; use the exact or gap-restricted sampler");
    }
    for (VertexId x = s; !in_tree[x]; x = next[x].to) {
      in_tree[x] = 1;
      edges.push_back(next[x].edge);
    }
  };
  for (VertexId s : order) run_from(s);
  for (VertexId s = 0; s < n; ++s) run_from(s);
  std::sort(edges.begin(), edges.end());
  return SpanningTree{std::move(edges)};
}

template <class Network>
SpanningTree wilson_sample(const Network& net, RngStream& rng,
                           std::uint64_t step_cap = kDefaultStepCap) {
  return wilson_sample(net, 0, std::span<const VertexId>{}, rng, step_cap);
}

inline SpanningTree wilson_sample(const WeightedGraphView& wg, VertexId root,
                                  std::span<const VertexId> order, RngStream& rng,
                                  std::uint64_t step_cap = kDefaultStepCap) {
  require(wg.graph().connected(), ErrorKind::Disconnected, "graph is disconnected");
  return wilson_sample(AliasNetwork(wg), root, order, rng, step_cap);
}

inline std::vector<VertexId> random_order(std::size_t n, RngStream& rng) {
  std::vector<VertexId> order(n);
  std::iota(order.begin(), order.end(), 0U);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

/// Aldous-Broder: walk until every vertex is seen; first-entrance edges form the tree.
template <class Network>
SpanningTree aldous_broder_sample(const Network& net, VertexId start, RngStream& rng,
                                  std::uint64_t step_cap = kDefaultStepCap) {
  const std::size_t n = net.n();
  std::vector<char> seen(n, 0);
  seen[start] = 1;
  std::size_t count = 1;
  std::vector<EdgeId> edges;
  VertexId x = start;
  for (std::uint64_t t = 0; count < n; ++t) {
    require(t < step_cap, ErrorKind::NonTermination, "Aldous-Broder exceeded its step cap");
    auto s = net.step(x, rng);
    if (!seen[s.to]) {
      seen[s.to] = 1;
      ++count;
      edges.push_back(s.edge);
    }
    x = s.to;
  }
  std::sort(edges.begin(), edges.end());
  return SpanningTree{std::move(edges)};
}

inline SpanningTree aldous_broder_sample(const WeightedGraphView& wg, VertexId start, RngStream& rng,
                                         std::uint64_t step_cap = kDefaultStepCap) {
  require(wg.graph().connected(), ErrorKind::Disconnected, "graph is disconnected");
  return aldous_broder_sample(AliasNetwork(wg), start, rng, step_cap);
}

// ------------------------------------------------------------------- MST

struct MstResult {
  SpanningTree tree;            // spanning forest when not `spanning`
  bool spanning = true;
  bool ties_perturbed = false;  // equal omega values were ordered by edge id
};

inline MstResult kruskal_mst(const MultiGraph& g, const std::vector<double>& omega) {
  std::vector<EdgeId> order(g.m());
  std::iota(order.begin(), order.end(), 0U);
  std::sort(order.begin(), order.end(), [&](EdgeId a, EdgeId b) {
    return omega[a] != omega[b] ? omega[a] < omega[b] : a < b;
  });
  MstResult r;
  for (std::size_t i = 1; i < order.size(); ++i)
    if (omega[order[i]] == omega[order[i - 1]]) r.ties_perturbed = true;
  DisjointSets ds(g.n());
  for (EdgeId e : order)
    if (ds.unite(g.edge(e).tail, g.edge(e).head)) r.tree.edges.push_back(e);
  std::sort(r.tree.edges.begin(), r.tree.edges.end());
  r.spanning = g.n() == 0 || r.tree.edges.size() + 1 == g.n();
  return r;
}

/// Prim from `start`, restarted in every other component (ties by edge id).
inline MstResult prim_mst(const MultiGraph& g, const std::vector<double>& omega, VertexId start = 0) {
  MstResult r;
  {
    std::vector<double> sorted(omega);
    std::sort(sorted.begin(), sorted.end());
    r.ties_perturbed = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
  }
  std::vector<char> in(g.n(), 0);
  using Item = std::pair<double, EdgeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  std::size_t components = 0;
  auto grow = [&](VertexId s) {
    ++components;
    in[s] = 1;
    for (const auto& inc : g.incident(s)) heap.emplace(omega[inc.edge], inc.edge);
    while (!heap.empty()) {
      auto [w, e] = heap.top();
      heap.pop();
      VertexId x = in[g.edge(e).tail] ? g.edge(e).head : g.edge(e).tail;
      if (in[x]) continue;
      in[x] = 1;
      r.tree.edges.push_back(e);
      for (const auto& inc : g.incident(x))
        if (!in[inc.other]) heap.emplace(omega[inc.edge], inc.edge);
    }
  };
  if (g.n() > 0) grow(start);
  for (VertexId v = 0; v < g.n(); ++v)
    if (!in[v]) grow(v);
  std::sort(r.tree.edges.begin(), r.tree.edges.end());
  r.spanning = components <= 1;
  return r;
}

/// Dense O(n^2) Prim on an implicit complete graph.
inline MstResult prim_mst(const ImplicitCompleteNetwork& net) {
  const std::size_t n = net.n();
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<VertexId> from(n, kNone);
  std::vector<char> in(n, 0);
  MstResult r;
  VertexId x = 0;
  in[0] = 1;
  for (std::size_t added = 1; added < n; ++added) {
    VertexId pick = kNone;
    for (VertexId v = 0; v < n; ++v) {
      if (in[v]) continue;
      double w = net.omega(x, v);
      if (w < best[v]) {
        best[v] = w;
        from[v] = x;
      }
      if (pick == kNone || best[v] < best[pick]) pick = v;
    }
    in[pick] = 1;
    r.tree.edges.push_back(static_cast<EdgeId>(complete_edge_id(n, from[pick], pick)));
    x = pick;
  }
  std::sort(r.tree.edges.begin(), r.tree.edges.end());
  return r;
}

// -------------------------------------------------------- exact oracles

/// Log of the weighted spanning-tree sum, from the cancellation-free
/// elimination of the grounded Laplacian.
inline double matrix_tree_log_partition(const WeightedGraphView& wg) {
  const auto& g = wg.graph();
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  require(g.n() <= 2 * kDenseLimit, ErrorKind::TooLarge, "graph too large for dense determinant");
  if (g.n() <= 1) return 0;
  auto [w, log_scale] = wg.scaled_weights();
  auto c = detail::conductance_matrix(g.n(), g, detail::identity_map(g.n()), w);
  GroundedElimination elim(c, order_with_last(g.n(), static_cast<VertexId>(g.n() - 1)));
  Real logdet = elim.log_det();
  require(std::isfinite(static_cast<double>(logdet)), ErrorKind::NumericalFailure,
          "Laplacian cofactor is not positive");
  return static_cast<double>(logdet + log_scale * static_cast<Real>(g.n() - 1));
}

inline double spanning_tree_count(const MultiGraph& g) {
  if (!g.connected()) return 0;
  return std::exp(matrix_tree_log_partition(WeightedGraphView::unweighted(g)));
}

namespace detail {
inline void enumerate_rec(const MultiGraph& h, const std::vector<EdgeId>& orig,
                          std::vector<EdgeId>& chosen, std::vector<SpanningTree>& out) {
  if (h.n() == 1) {
    SpanningTree t{chosen};
    std::sort(t.edges.begin(), t.edges.end());
    out.push_back(std::move(t));
    return;
  }
  if (h.m() == 0) return;
  const EdgeId first = 0;
  {
    auto c = contract_edges(h, std::span<const EdgeId>(&first, 1));
    std::vector<EdgeId> o(c.graph.m());
    for (EdgeId e = 0; e < h.m(); ++e)
      if (c.edge_map[e] != kNone) o[c.edge_map[e]] = orig[e];
    chosen.push_back(orig[0]);
    enumerate_rec(c.graph, o, chosen, out);
    chosen.pop_back();
  }
  {
    auto d = delete_edges(h, std::span<const EdgeId>(&first, 1));
    if (!d.graph.connected()) return;
    std::vector<EdgeId> o(orig.begin() + 1, orig.end());
    enumerate_rec(d.graph, o, chosen, out);
  }
}
}  // namespace detail

/// Every spanning tree once, by contraction (first) and deletion of the
/// lowest-id edge.
inline std::vector<SpanningTree> enumerate_spanning_trees(const MultiGraph& g,
                                                          std::size_t cap = 1'000'000) {
  std::vector<SpanningTree> out;
  if (g.n() == 0 || !g.connected()) return out;
  double count = spanning_tree_count(g);
  require(count <= static_cast<double>(cap) + 0.5, ErrorKind::TooLarge,
          "spanning-tree count " + std::to_string(count) + " exceeds cap");
  std::vector<EdgeId> orig(g.m());
  std::iota(orig.begin(), orig.end(), 0U);
  std::vector<EdgeId> chosen;
  out.reserve(static_cast<std::size_t>(count + 0.5));
  detail::enumerate_rec(g, orig, chosen, out);
  return out;
}

struct TreeLaw {
  std::vector<SpanningTree> trees;
  std::vector<double> hamiltonian;
  std::vector<double> prob;
  double log_Z = 0;
  double beta = 0;

  std::size_t index_of(const SpanningTree& t) const {
    auto it = std::lower_bound(trees.begin(), trees.end(), t);
    return it != trees.end() && *it == t ? static_cast<std::size_t>(it - trees.begin()) : kNone;
  }
  std::vector<double> marginals(std::size_t m) const {
    std::vector<double> p(m, 0);
    for (std::size_t i = 0; i < trees.size(); ++i)
      for (EdgeId e : trees[i].edges) p[e] += prob[i];
    return p;
  }
};

/// Gibbs law over all spanning trees; trees sorted lexicographically.
inline TreeLaw tree_law_from(const WeightedGraphView& wg, std::vector<SpanningTree> trees) {
  TreeLaw law;
  law.beta = wg.beta();
  std::sort(trees.begin(), trees.end());
  law.trees = std::move(trees);
  std::vector<double> lw(law.trees.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < law.trees.size(); ++i) {
    double h = 0, l = 0;
    for (EdgeId e : law.trees[i].edges) {
      h += wg.omega(e);
      l += wg.log_weight(e);
    }
    law.hamiltonian.push_back(h);
    lw[i] = l;
    top = std::max(top, l);
  }
  double s = 0;
  for (double l : lw) s += std::exp(l - top);
  law.log_Z = top + std::log(s);
  for (double l : lw) law.prob.push_back(std::exp(l - law.log_Z));
  return law;
}

inline TreeLaw exact_tree_law(const WeightedGraphView& wg, std::size_t cap = 1'000'000) {
  require(wg.graph().connected(), ErrorKind::Disconnected, "graph is disconnected");
  return tree_law_from(wg, enumerate_spanning_trees(wg.graph(), cap));
}

/// One tree per line, edge ids separated by spaces.
inline void write_trees(std::ostream& out, std::span<const SpanningTree> trees) {
  for (const auto& t : trees) {
    for (std::size_t i = 0; i < t.edges.size(); ++i) out << (i ? " " : "") << t.edges[i];
    out << '\n';
  }
}

inline std::vector<SpanningTree> read_trees(std::istream& in) {
  std::vector<SpanningTree> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    std::istringstream row(line);
    SpanningTree t;
    std::string tok;
    while (row >> tok) {
      try {
        std::size_t used = 0;
        auto v = std::stoull(tok, &used);
        require(used == tok.size(), ErrorKind::Parse, "");
        t.edges.push_back(static_cast<EdgeId>(v));
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, "tree list line " + std::to_string(no) + ": bad edge id '" + tok + "'");
      }
    }
    std::sort(t.edges.begin(), t.edges.end());
    out.push_back(std::move(t));
  }
  return out;
}

// ------------------------------------------------- exact sequential sampler

/// Exact sampler: decide edges one at a time with the conditional Kirchhoff
/// probability, contracting accepted and deleting rejected edges. Each step
/// is a cancellation-free elimination, so any weight range is handled.
inline SpanningTree kirchhoff_sequential_sample(const WeightedGraphView& wg, RngStream& rng) {
  const auto& g0 = wg.graph();
  require(g0.connected(), ErrorKind::Disconnected, "graph is disconnected");
  MultiGraph h = g0;
  std::vector<EdgeId> orig(g0.m());
  std::iota(orig.begin(), orig.end(), 0U);
  std::vector<EdgeId> chosen;
  while (h.n() > 1) {
    const EdgeId first = 0;
    std::vector<double> om(h.m());
    for (EdgeId e = 0; e < h.m(); ++e) om[e] = wg.omega(orig[e]);
    WeightedGraphView cur(h, om, wg.beta());
    double p = h.degree(h.edge(0).tail) == 1 || h.degree(h.edge(0).head) == 1
                   ? 1.0
                   : kirchhoff_edge_probability(cur, 0);
    if (rng.uniform() < p) {
      chosen.push_back(orig[0]);
      auto c = contract_edges(h, std::span<const EdgeId>(&first, 1));
      std::vector<EdgeId> o(c.graph.m());
      for (EdgeId e = 0; e < h.m(); ++e)
        if (c.edge_map[e] != kNone) o[c.edge_map[e]] = orig[e];
      h = std::move(c.graph);
      orig = std::move(o);
    } else {
      auto d = delete_edges(h, std::span<const EdgeId>(&first, 1));
      h = std::move(d.graph);
      orig.erase(orig.begin());
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return SpanningTree{std::move(chosen)};
}

// ------------------------------------------- gap-restricted high disorder

struct GapSample {
  SpanningTree tree;
  double tv_certificate = 0;  // upper bound on TV(sample law, Gibbs law)
  std::size_t candidates = 0; // non-MST edges retained
  std::size_t kernel_vertices = 0;
  std::size_t kernel_edges = 0;
};

namespace detail {

/// Exact Gibbs sample on a connected graph given by its edges and log
/// weights, through the kernel: bridges always enter the tree, every dropped
/// cycle and every unused kernel path loses exactly one edge, picked with
/// probability proportional to its resistance.
inline std::vector<EdgeId> sample_through_kernel(const MultiGraph& g, const std::vector<double>& log_w,
                                                 RngStream& rng, std::size_t* kv = nullptr,
                                                 std::size_t* ke = nullptr) {
  auto kd = kernel_decompose(g, log_w);
  if (kv) *kv = kd.kernel.n();
  if (ke) *ke = kd.kernel.m();
  std::vector<EdgeId> tree = kd.bridges;
  auto drop_one = [&](const std::vector<EdgeId>& path) {
    double top = -std::numeric_limits<double>::infinity();
    for (EdgeId e : path) top = std::max(top, -log_w[e]);
    double total = 0;
    for (EdgeId e : path) total += std::exp(-log_w[e] - top);
    double u = rng.uniform() * total;
    std::size_t miss = path.size() - 1;
    for (std::size_t i = 0; i < path.size(); ++i) {
      u -= std::exp(-log_w[path[i]] - top);
      if (u < 0) {
        miss = i;
        break;
      }
    }
    for (std::size_t i = 0; i < path.size(); ++i)
      if (i != miss) tree.push_back(path[i]);
  };
  for (const auto& cyc : kd.cycles) drop_one(cyc);
  if (kd.kernel.n() > 1) {
    auto kt = kirchhoff_sequential_sample(kd.view(), rng);
    std::vector<char> in(kd.kernel.m(), 0);
    for (EdgeId k : kt.edges) in[k] = 1;
    for (EdgeId k = 0; k < kd.kernel.m(); ++k) {
      if (in[k]) {
        tree.insert(tree.end(), kd.phi[k].begin(), kd.phi[k].end());
      } else {
        drop_one(kd.phi[k]);
      }
    }
  }
  std::sort(tree.begin(), tree.end());
  return tree;
}

}  // namespace detail

/// Sampler for strong disorder. Keeps the MST plus every non-tree edge e with
/// beta (omega_e - max omega on its MST path) <= gap, samples that subgraph
/// exactly, and bounds the total variation to the full Gibbs law by
/// sum over discarded e of |path(e)| exp(-beta gap_e).
inline GapSample gap_restricted_sample(const WeightedGraphView& wg, RngStream& rng, double gap = 45) {
  const auto& g = wg.graph();
  require(g.connected(), ErrorKind::Disconnected, "graph is disconnected");
  auto mst = kruskal_mst(g, wg.omega());
  const std::size_t n = g.n();
  // Binary lifting for path maxima.
  std::size_t levels = 1;
  while ((std::size_t{1} << levels) < n) ++levels;
  std::vector<std::vector<VertexId>> up(levels, std::vector<VertexId>(n, 0));
  std::vector<std::vector<double>> mx(levels, std::vector<double>(n, -std::numeric_limits<double>::infinity()));
  std::vector<std::uint32_t> depth(n, 0);
  {
    auto t = edge_subgraph(g, mst.tree.edges);
    std::vector<char> seen(n, 0);
    std::vector<VertexId> q{0};
    seen[0] = 1;
    for (std::size_t h = 0; h < q.size(); ++h) {
      VertexId x = q[h];
      for (const auto& inc : t.incident(x)) {
        if (seen[inc.other]) continue;
        seen[inc.other] = 1;
        up[0][inc.other] = x;
        mx[0][inc.other] = wg.omega(mst.tree.edges[inc.edge]);
        depth[inc.other] = depth[x] + 1;
        q.push_back(inc.other);
      }
    }
    for (std::size_t k = 1; k < levels; ++k)
      for (VertexId v = 0; v < n; ++v) {
        up[k][v] = up[k - 1][up[k - 1][v]];
        mx[k][v] = std::max(mx[k - 1][v], mx[k - 1][up[k - 1][v]]);
      }
  }
  auto path_query = [&](VertexId a, VertexId b) {
    double m = -std::numeric_limits<double>::infinity();
    std::uint32_t len = 0;
    if (depth[a] < depth[b]) std::swap(a, b);
    for (std::size_t k = levels; k-- > 0;)
      if (depth[a] - depth[b] >= (1U << k)) {
        m = std::max(m, mx[k][a]);
        a = up[k][a];
        len += 1U << k;
      }
    if (a != b) {
      for (std::size_t k = levels; k-- > 0;)
        if (up[k][a] != up[k][b]) {
          m = std::max({m, mx[k][a], mx[k][b]});
          a = up[k][a];
          b = up[k][b];
          len += 2U << k;
        }
      m = std::max({m, mx[0][a], mx[0][b]});
      len += 2;
    }
    return std::pair{m, len};
  };
  std::vector<char> in_mst(g.m(), 0);
  for (EdgeId e : mst.tree.edges) in_mst[e] = 1;
  GapSample out;
  std::vector<EdgeId> keep = mst.tree.edges;
  for (EdgeId e = 0; e < g.m(); ++e) {
    if (in_mst[e]) continue;
    auto [m, len] = path_query(g.edge(e).tail, g.edge(e).head);
    double excess = wg.beta() * (wg.omega(e) - m);
    if (excess <= gap) {
      keep.push_back(e);
      ++out.candidates;
    } else {
      out.tv_certificate += len * std::exp(-excess);
    }
  }
  std::sort(keep.begin(), keep.end());
  auto sub = edge_subgraph(g, keep);
  std::vector<double> lw(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) lw[i] = wg.log_weight(keep[i]);
  auto local = detail::sample_through_kernel(sub, lw, rng, &out.kernel_vertices, &out.kernel_edges);
  for (auto& e : local) e = keep[e];
  std::sort(local.begin(), local.end());
  out.tree.edges = std::move(local);
  return out;
}

/// Same on an implicit complete graph; the O(n^2) scan runs one tree BFS per
/// vertex and never materialises the edge list.
inline GapSample gap_restricted_sample(const ImplicitCompleteNetwork& net, RngStream& rng, double gap = 45) {
  const std::size_t n = net.n();
  auto mst = prim_mst(net);
  std::vector<std::vector<std::pair<VertexId, double>>> adj(n);
  for (EdgeId id : mst.tree.edges) {
    auto e = net.endpoints(id);
    double w = net.omega(e.tail, e.head);
    adj[e.tail].emplace_back(e.head, w);
    adj[e.head].emplace_back(e.tail, w);
  }
  GapSample out;
  std::vector<EdgeId> keep_ids = mst.tree.edges;
  std::vector<double> pmax(n);
  std::vector<std::uint32_t> plen(n);
  std::vector<VertexId> queue(n);
  std::vector<VertexId> parent(n);
  for (VertexId u = 0; u + 1 < n; ++u) {
    std::size_t head = 0, tail = 0;
    queue[tail++] = u;
    parent[u] = u;
    pmax[u] = -std::numeric_limits<double>::infinity();
    plen[u] = 0;
    while (head < tail) {
      VertexId x = queue[head++];
      for (auto [y, w] : adj[x]) {
        if (y == parent[x]) continue;
        parent[y] = x;
        pmax[y] = std::max(pmax[x], w);
        plen[y] = plen[x] + 1;
        queue[tail++] = y;
      }
    }
    for (VertexId v = u + 1; v < n; ++v) {
      if (plen[v] == 1) continue;  // tree edge
      double excess = net.beta() * (net.omega(u, v) - pmax[v]);
      if (excess <= gap) {
        keep_ids.push_back(static_cast<EdgeId>(complete_edge_id(n, u, v)));
        ++out.candidates;
      } else {
        out.tv_certificate += plen[v] * std::exp(-excess);
      }
    }
  }
  std::sort(keep_ids.begin(), keep_ids.end());
  std::vector<Edge> edges;
  std::vector<double> lw;
  for (EdgeId id : keep_ids) {
    auto e = net.endpoints(id);
    edges.push_back(e);
    lw.push_back(net.beta() == 0 ? 0.0 : -net.beta() * net.omega(e.tail, e.head));
  }
  MultiGraph sub(n, std::move(edges));
  auto local = detail::sample_through_kernel(sub, lw, rng, &out.kernel_vertices, &out.kernel_edges);
  for (auto& e : local) e = keep_ids[e];
  std::sort(local.begin(), local.end());
  out.tree.edges = std::move(local);
  return out;
}

}  // namespace rstre
