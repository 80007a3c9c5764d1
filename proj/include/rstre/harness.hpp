#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "electric.hpp"
#include "environment.hpp"
#include "graph.hpp"
#include "kernel.hpp"
#include "lattice.hpp"
#include "observables.hpp"
#include "reduction.hpp"
#include "sampler.hpp"

namespace rstre {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"overlap-sweep",    "length-sweep",      "diameter-scaling",
                                              "local-census",     "kernel-pipeline",   "free-energy-sweep",
                                              "mst-equality",     "diagnostics",       "sample"};
  return names;
}

// ---------------------------------------------------------------- numbers

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& s) {
  double x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::Parse, "bad number '" + s + "'");
  return x;
}

inline std::uint64_t parse_unsigned(const std::string& s) {
  std::uint64_t x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty(), ErrorKind::Parse,
          "bad integer '" + s + "'");
  return x;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Beta expression: a '*'-separated product of numbers, n, n^k, log(n) and
/// log(n)^k, evaluated at the graph size n.
inline double eval_beta(const std::string& expr, std::size_t n) {
  double v = 1;
  const double nn = static_cast<double>(n);
  for (auto tok : split(trim(expr), '*')) {
    tok = trim(tok);
    require(!tok.empty(), ErrorKind::Parse, "empty factor in beta '" + expr + "'");
    double power = 1;
    auto caret = tok.rfind('^');
    std::string base = tok;
    if (caret != std::string::npos && tok.back() != ')') {
      power = parse_number(tok.substr(caret + 1));
      base = tok.substr(0, caret);
    }
    double b;
    if (base == "n") {
      b = nn;
    } else if (base == "log(n)") {
      b = std::log(nn);
    } else {
      b = parse_number(base);
    }
    v *= std::pow(b, power);
  }
  require(std::isfinite(v) && v >= 0, ErrorKind::Parse, "beta '" + expr + "' is not a finite value >= 0");
  return v;
}

/// "a:b:step" (inclusive) or a comma list of beta expressions.
inline std::vector<std::string> expand_beta_grid(const std::string& text) {
  auto parts = split(text, ':');
  if (parts.size() == 3) {
    double a = parse_number(trim(parts[0])), b = parse_number(trim(parts[1])), s = parse_number(trim(parts[2]));
    require(s > 0 && b >= a, ErrorKind::Parse, "beta grid needs step > 0 and end >= start");
    std::vector<std::string> out;
    auto count = static_cast<std::size_t>(std::floor((b - a) / s + 1e-9));
    for (std::size_t i = 0; i <= count; ++i) out.push_back(format_number(a + static_cast<double>(i) * s));
    return out;
  }
  std::vector<std::string> out;
  for (auto& p : split(text, ',')) {
    p = trim(p);
    if (!p.empty()) out.push_back(p);
  }
  require(!out.empty(), ErrorKind::Parse, "empty beta grid");
  return out;
}

// ----------------------------------------------------------------- config

struct ExperimentConfig {
  std::string experiment;
  std::string graph = "complete:10";
  std::string law = "uniform01";
  std::vector<std::string> betas{"1"};
  std::size_t replicas = 10;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out;
  bool exact = false;
  bool timing = false;
  std::map<std::string, std::string> params;  // experiment parameters and tol.* overrides

  bool operator==(const ExperimentConfig&) const = default;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : parse_number(it->second);
  }
  std::string param(const std::string& key, const std::string& fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

/// Flat key=value lines in a fixed order.
inline std::string format_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "experiment=" << c.experiment << '\n'
    << "graph=" << c.graph << '\n'
    << "law=" << c.law << '\n'
    << "beta=" << join(c.betas, ",") << '\n'
    << "replicas=" << c.replicas << '\n'
    << "seed=" << c.seed << '\n'
    << "workers=" << c.workers << '\n'
    << "out=" << c.out << '\n'
    << "exact=" << (c.exact ? 1 : 0) << '\n'
    << "timing=" << (c.timing ? 1 : 0) << '\n';
  for (const auto& [k, v] : c.params) o << k << '=' << v << '\n';
  return o.str();
}

inline bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  fail(ErrorKind::Parse, "bad boolean '" + s + "'");
}

inline void apply_config_line(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "experiment") c.experiment = value;
  else if (key == "graph") c.graph = value;
  else if (key == "law") c.law = value;
  else if (key == "beta") c.betas = expand_beta_grid(value);
  else if (key == "beta-grid") c.betas = expand_beta_grid(value);
  else if (key == "replicas") c.replicas = parse_unsigned(value);
  else if (key == "seed") c.seed = parse_unsigned(value);
  else if (key == "workers") c.workers = parse_unsigned(value);
  else if (key == "out") c.out = value;
  else if (key == "exact") c.exact = parse_bool(value);
  else if (key == "timing") c.timing = parse_bool(value);
  else c.params[key] = value;
}

/// Reads key=value lines; '#' starts a comment, except that a header line
/// "# key=value" written by the harness is read back as a setting when
/// `header` is set.
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}, bool header = false) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (header) {
      if (line.rfind("# ", 0) != 0) continue;
      line = line.substr(2);
      if (line.rfind("rstre ", 0) == 0) continue;
    } else {
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Parse, "config line " + std::to_string(lineno) + " lacks '='");
    try {
      apply_config_line(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, "config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline ExperimentConfig read_config_file(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::Io, "cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

// ---------------------------------------------------------------- graphs

struct GraphSpec {
  std::string kind;                 // complete, box, torus, regular, path, cycle, star, file
  std::vector<std::size_t> params;  // kind-specific
  std::string path;
};

/// "complete:N", "box:L:d", "torus:L:d", "regular:N:d[:seed]", "path:N",
/// "cycle:N", "star:N", "file:PATH"; the first parameter may be a comma list
/// ("complete:1000,2000"), giving one spec per entry.
inline std::vector<GraphSpec> parse_graph_specs(const std::string& text) {
  require(!text.empty(), ErrorKind::Parse, "empty graph spec");
  auto colon = text.find(':');
  std::string kind = text.substr(0, colon);
  if (kind == "file") return {GraphSpec{"file", {}, text.substr(colon + 1)}};
  static const std::map<std::string, std::pair<std::size_t, std::size_t>> arity{
      {"complete", {1, 1}}, {"box", {2, 2}}, {"torus", {2, 2}}, {"regular", {2, 3}},
      {"path", {1, 1}},     {"cycle", {1, 1}}, {"star", {1, 1}}};
  auto it = arity.find(kind);
  if (it == arity.end()) return {GraphSpec{"file", {}, text}};
  require(colon != std::string::npos, ErrorKind::Parse, "graph spec '" + text + "' lacks parameters");
  auto parts = split(text.substr(colon + 1), ':');
  require(parts.size() >= it->second.first && parts.size() <= it->second.second, ErrorKind::Parse,
          "wrong parameter count in graph spec '" + text + "'");
  std::vector<GraphSpec> out;
  for (const auto& first : split(parts[0], ',')) {
    GraphSpec s{kind, {parse_unsigned(trim(first))}, {}};
    for (std::size_t i = 1; i < parts.size(); ++i) s.params.push_back(parse_unsigned(trim(parts[i])));
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string format_graph_spec(const GraphSpec& s) {
  if (s.kind == "file") return "file:" + s.path;
  std::string t = s.kind;
  for (auto p : s.params) t += ":" + std::to_string(p);
  return t;
}

inline EdgeListData build_graph(const GraphSpec& s) {
  auto P = [&](std::size_t i) { return s.params.at(i); };
  if (s.kind == "file") return read_edge_list(s.path);
  if (s.kind == "complete") return {build_complete(P(0)), std::nullopt};
  if (s.kind == "box") return {build_box(P(0), P(1)), std::nullopt};
  if (s.kind == "torus") return {build_box(P(0), P(1), true), std::nullopt};
  if (s.kind == "regular")
    return {build_random_regular(P(0), P(1), s.params.size() > 2 ? P(2) : 0), std::nullopt};
  std::vector<Edge> e;
  std::size_t n = P(0);
  require(n >= 1, ErrorKind::InvalidArgument, "graph needs n >= 1");
  if (s.kind == "path" || s.kind == "cycle")
    for (VertexId i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  if (s.kind == "cycle" && n >= 3) e.push_back({0, static_cast<VertexId>(n - 1)});
  if (s.kind == "star")
    for (VertexId i = 1; i < n; ++i) e.push_back({0, i});
  return {MultiGraph(n, std::move(e)), std::nullopt};
}

// -------------------------------------------------------------------- CSV

struct ResultRow {
  std::string experiment;
  std::size_t n = 0;
  double beta = 0;
  long long replica = -1;  // -1 for aggregate rows
  std::string observable;
  double value = 0;
  double stderr_ = 0;
  double wall_ms = 0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kCsvHeader = "experiment,n,beta,replica,observable,value,stderr,wall_ms,seed";

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string format_row(const ResultRow& r) {
  return csv_field(r.experiment) + ',' + std::to_string(r.n) + ',' + format_number(r.beta) + ',' +
         std::to_string(r.replica) + ',' + csv_field(r.observable) + ',' + format_number(r.value) + ',' +
         format_number(r.stderr_) + ',' + format_number(r.wall_ms) + ',' + std::to_string(r.seed);
}

inline std::string render_csv(const std::vector<ResultRow>& rows, const std::string& comment = {}) {
  std::string s;
  for (const auto& line : split(comment, '\n'))
    if (!line.empty()) s += "# " + line + '\n';
  s += kCsvHeader;
  s += '\n';
  for (const auto& r : rows) s += format_row(r) + '\n';
  return s;
}

/// Temp file in the target directory, then rename.
inline void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::Io, "cannot write " + tmp.string());
    f << text;
    f.flush();
    require(f.good(), ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot rename into " + path);
  }
}

inline void write_csv(const std::vector<ResultRow>& rows, const std::string& path, const std::string& comment = {}) {
  write_text_atomic(path, render_csv(rows, comment));
}

// -------------------------------------------------------------- replicas

inline std::uint64_t replica_seed(std::uint64_t master, std::size_t replica) {
  return splitmix64(master ^ stream_label("replica", replica));
}

/// Runs job(i) for i < count on `workers` threads; results are ordered by i.
template <class Result>
std::vector<Result> run_indexed(std::size_t count, std::size_t workers, const std::function<Result(std::size_t)>& job) {
  std::vector<Result> out(count);
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = job(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) out[i] = job(i);
    });
  for (auto& t : pool) t.join();
  return out;
}

struct RunResult {
  std::vector<ResultRow> rows;
  std::size_t failed_replicas = 0;
  std::size_t failed_checks = 0;
};

namespace detail {

struct Point {
  GraphSpec spec;
  std::shared_ptr<const MultiGraph> graph;
  std::optional<std::vector<double>> fixed_omega;
  bool implicit = false;  // complete graph too large to materialise
  std::string beta_expr;
  double beta = 0;
  std::size_t index = 0;
};

inline constexpr std::size_t kImplicitThreshold = 2000;

struct ReplicaOut {
  std::vector<ResultRow> rows;
  bool failed = false;
  bool check_failed = false;
};

inline std::vector<double> environment_for(const Point& p, const DisorderLaw& law, std::uint64_t env_seed) {
  if (p.fixed_omega) return *p.fixed_omega;
  return sample_environment(law, *p.graph, env_seed).omega;
}

inline double median_of(std::vector<double> x) { return x.empty() ? std::numeric_limits<double>::quiet_NaN() : median(std::move(x)); }

}  // namespace detail

/// Runs one of the named experiments. Replica i of a grid point uses the
/// environment seed replica_seed(seed, i) and sampling streams keyed by
/// (seed, i, point), so rows do not depend on the worker count.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  const auto& names = experiment_names();
  require(std::find(names.begin(), names.end(), cfg.experiment) != names.end(), ErrorKind::InvalidArgument,
          "unknown experiment '" + cfg.experiment + "'");
  require(cfg.replicas >= 1, ErrorKind::InvalidArgument, "need at least one replica");
  const DisorderLaw law = parse_law(cfg.law);
  const auto specs = parse_graph_specs(cfg.graph);
  const std::string& ex = cfg.experiment;

  std::vector<detail::Point> points;
  for (const auto& spec : specs) {
    detail::Point base;
    base.spec = spec;
    if (spec.kind == "complete" && spec.params[0] > detail::kImplicitThreshold &&
        (ex == "overlap-sweep" || ex == "length-sweep" || ex == "diameter-scaling" || ex == "local-census" ||
         ex == "mst-equality" || ex == "sample") &&
        !cfg.exact) {
      base.implicit = true;
      base.graph = std::make_shared<const MultiGraph>(spec.params[0], std::vector<Edge>{});
    } else {
      auto data = build_graph(spec);
      base.graph = std::make_shared<const MultiGraph>(std::move(data.graph));
      base.fixed_omega = std::move(data.omega);
    }
    for (const auto& b : cfg.betas) {
      auto p = base;
      p.beta_expr = b;
      p.beta = eval_beta(b, base.graph->n());
      p.index = points.size();
      points.push_back(std::move(p));
    }
  }

  RunResult result;
  for (const auto& pt : points) {
    const std::size_t n = ex == "free-energy-sweep" ? 0 : pt.graph->n();
    auto job = [&](std::size_t r) -> detail::ReplicaOut {
      detail::ReplicaOut out;
      const std::uint64_t env_seed = replica_seed(cfg.seed, r);
      RngStream rng = RngStream(cfg.seed, "sample", r).child("point", pt.index);
      auto t0 = std::chrono::steady_clock::now();
      auto emit = [&](const std::string& name, double value, double err = 0, std::size_t nn = 0) {
        ResultRow row{ex, nn ? nn : n, pt.beta, static_cast<long long>(r), name, value, err, 0, env_seed};
        out.rows.push_back(std::move(row));
      };
      try {
        const auto& g = *pt.graph;
        std::optional<ImplicitCompleteNetwork> net;
        std::optional<WeightedGraphView> wg;
        if (pt.implicit) {
          net.emplace(g.n(), law, env_seed, pt.beta);
        } else if (ex != "free-energy-sweep") {
          wg.emplace(pt.graph, detail::environment_for(pt, law, env_seed), pt.beta);
        }
        auto draw = [&](RngStream& s) { return net ? sample_tree(*net, s) : sample_tree(*wg, s); };
        auto as_graph = [&](const SpanningTree& t) {
          return net ? complete_tree_graph(*net, t) : edge_subgraph(g, t.edges);
        };
        if (ex == "overlap-sweep") {
          if (cfg.exact) {
            emit("edge_overlap", edge_overlap_exact(*wg));
            if (spanning_tree_count(g) <= cfg.param("tree-cap", 1e5))
              emit("tree_overlap", tree_overlap_exact(*wg));
          } else {
            RngStream a = rng.child("replica-a"), b = rng.child("replica-b");
            emit("edge_overlap", static_cast<double>(common_edges(draw(a), draw(b))));
          }
        } else if (ex == "length-sweep") {
          if (cfg.exact) {
            emit("expected_length", expected_length_exact(*wg));
          } else {
            auto t = draw(rng);
            double len = 0;
            for (EdgeId e : t.edges) len += net ? net->omega(net->endpoints(e).tail, net->endpoints(e).head) : wg->omega(e);
            emit("tree_length", len);
          }
          auto mst = net ? prim_mst(*net) : kruskal_mst(g, wg->omega());
          double ml = 0;
          for (EdgeId e : mst.tree.edges) ml += net ? net->omega(net->endpoints(e).tail, net->endpoints(e).head) : wg->omega(e);
          emit("mst_length", ml);
        } else if (ex == "diameter-scaling" || ex == "sample") {
          auto t = draw(rng);
          auto tg = as_graph(t);
          emit("diameter", tree_diameter(tg));
          if (ex == "sample") {
            double h = 0;
            for (EdgeId e : t.edges) h += net ? net->omega(net->endpoints(e).tail, net->endpoints(e).head) : wg->omega(e);
            emit("hamiltonian", h);
            std::size_t md = 0;
            for (VertexId v = 0; v < tg.n(); ++v) md = std::max(md, tg.degree(v));
            emit("max_degree", static_cast<double>(md));
          }
        } else if (ex == "local-census") {
          auto tg = as_graph(draw(rng));
          emit("N_path2", static_cast<double>(count_tree_maps(tg, 0, path_pattern(2))));
          emit("N_path3", static_cast<double>(count_tree_maps(tg, 0, path_pattern(3))));
          emit("N_star3", static_cast<double>(count_tree_maps(tg, 0, star_pattern(3))));
        } else if (ex == "kernel-pipeline") {
          double eps = cfg.param("eps", 0.5);
          double p = cfg.param("p", (1 + eps) / static_cast<double>(g.n()));
          auto giant = giant_cluster(g, wg->omega(), law, p);
          double threshold = inverse_cdf(law, p);
          std::vector<VertexId> local(g.n(), kNone);
          for (std::size_t i = 0; i < giant.size(); ++i) local[giant[i]] = static_cast<VertexId>(i);
          std::vector<Edge> ce;
          std::vector<double> com;
          for (EdgeId e = 0; e < g.m(); ++e) {
            auto ed = g.edge(e);
            if (local[ed.tail] == kNone || local[ed.head] == kNone || wg->omega(e) > threshold) continue;
            ce.push_back({local[ed.tail], local[ed.head]});
            com.push_back(wg->omega(e));
          }
          WeightedGraphView cw(MultiGraph(giant.size(), std::move(ce)), com, pt.beta);
          auto kd = kernel_decompose(cw);
          emit("giant_size", static_cast<double>(giant.size()));
          emit("core_vertices", static_cast<double>(kd.core.graph.n()));
          emit("core_excess", static_cast<double>(graph_excess(kd.core.graph)));
          emit("kernel_vertices", static_cast<double>(kd.kernel.n()));
          emit("kernel_edges", static_cast<double>(kd.kernel.m()));
          if (cfg.exact && spanning_tree_count(cw.graph()) <= cfg.param("tree-cap", 1e5)) {
            auto rep = kernel_coupling_residuals(cw, cfg.param("tol.coupling", 1e-9));
            emit("coupling_residual", std::max({rep.marginal_error, rep.law_error, rep.resistance_error}));
            emit("check_kernel_coupling", rep.passed ? 1 : 0);
            if (!rep.passed) out.check_failed = true;
          }
          auto prefix = cfg.param("export", std::string{});
          if (!prefix.empty() && r == 0) {
            std::vector<double> om(cw.omega().begin(), cw.omega().end());
            export_kernel(kd, &om, prefix);
          }
        } else if (ex == "free-energy-sweep") {
          require(pt.spec.kind == "box", ErrorKind::InvalidArgument, "free-energy-sweep needs a box graph");
          auto L = pt.spec.params[0], d = pt.spec.params[1];
          auto bf = build_boundary_box(L, d, Boundary::Free);
          auto bw = build_boundary_box(L, d, Boundary::Wired);
          auto of = lattice_environment(bf, law, env_seed), ow = lattice_environment(bw, law, env_seed);
          std::size_t vol = bf.volume();
          emit("free_energy_free", free_energy(bf, of, pt.beta), 0, vol);
          emit("free_energy_wired", free_energy(bw, ow, pt.beta), 0, vol);
          emit("overlap_density_free", overlap_density(bf, of, pt.beta), 0, vol);
          emit("overlap_density_wired", overlap_density(bw, ow, pt.beta), 0, vol);
        } else if (ex == "mst-equality") {
          auto t = draw(rng);
          auto mst = net ? prim_mst(*net) : kruskal_mst(g, wg->omega());
          emit("mst_equal", t == mst.tree ? 1 : 0);
        } else if (ex == "diagnostics") {
          auto d = walk_diagnostics(*wg, env_seed);
          emit("D", d.D);
          emit("t_mix", static_cast<double>(d.t_mix));
          emit("escaping", d.escaping);
          emit("Phi", d.Phi);
          double bound = heat_cheeger_bound(d.profile);
          emit("heat_cheeger_bound", bound);
          emit("phi_heuristic", d.phi_exact ? 0 : 1);
          if (d.phi_exact) {
            bool ok = static_cast<double>(d.t_mix) <= bound;
            emit("check_heat_cheeger", ok ? 1 : 0);
            if (!ok) out.check_failed = true;
          }
        }
      } catch (const Error& e) {
        out.rows.clear();
        emit("error:" + std::string(to_string(e.kind())), std::numeric_limits<double>::quiet_NaN());
        out.failed = true;
      }
      if (cfg.timing) {
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        for (auto& row : out.rows) row.wall_ms = ms;
      }
      return out;
    };
    auto outs = run_indexed<detail::ReplicaOut>(cfg.replicas, cfg.workers, job);

    // Aggregates in replica order.
    std::map<std::string, std::vector<double>> by_name;
    std::vector<std::string> order;
    std::size_t agg_n = n;
    for (const auto& o : outs) {
      result.failed_replicas += o.failed;
      result.failed_checks += o.check_failed;
      for (const auto& row : o.rows) {
        result.rows.push_back(row);
        agg_n = row.n;
        if (row.observable.rfind("error:", 0) == 0) continue;
        if (!by_name.count(row.observable)) order.push_back(row.observable);
        by_name[row.observable].push_back(row.value);
      }
    }
    for (const auto& name : order) {
      const auto& v = by_name[name];
      auto est = mean_stderr(v);
      result.rows.push_back({ex, agg_n, pt.beta, -1, "mean_" + name, est.mean, est.stderr_, 0, cfg.seed});
      if (ex == "diameter-scaling" && name == "diameter")
        result.rows.push_back({ex, agg_n, pt.beta, -1, "median_diameter", detail::median_of(v), 0, 0, cfg.seed});
    }
    if (ex == "local-census") {
      for (auto [name, ref] : {std::pair{"N_path2", 2.0}, {"N_path3", 3.0}, {"N_star3", 3.0}})
        result.rows.push_back({ex, agg_n, pt.beta, -1, std::string("reference_") + name, ref, 0, 0, cfg.seed});
    }
  }
  return result;
}

inline std::string header_comment(const ExperimentConfig& cfg) {
  return std::string("rstre ") + kVersion + "\n" + format_config(cfg);
}

/// Tree drawn by replica r at the first grid point of `cfg` (explicit graphs),
/// with the graph and disorder it was drawn on.
struct SampledTree {
  MultiGraph graph;
  std::vector<double> omega;
  SpanningTree tree;
};

inline SampledTree sample_replica_tree(const ExperimentConfig& cfg, std::size_t r) {
  const DisorderLaw law = parse_law(cfg.law);
  auto spec = parse_graph_specs(cfg.graph).front();
  auto data = build_graph(spec);
  auto g = std::make_shared<const MultiGraph>(std::move(data.graph));
  auto env_seed = replica_seed(cfg.seed, r);
  std::vector<double> omega = data.omega ? *data.omega : sample_environment(law, *g, env_seed).omega;
  WeightedGraphView wg(g, omega, eval_beta(cfg.betas.front(), g->n()));
  RngStream rng = RngStream(cfg.seed, "sample", r).child("point", 0);
  auto t = sample_tree(wg, rng);
  return {*g, std::move(omega), std::move(t)};
}

}  // namespace rstre
