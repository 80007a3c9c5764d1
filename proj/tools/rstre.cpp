#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rstre/harness.hpp"

namespace {

const std::map<std::string, std::string> kVerbs{
    {"sample", "sample"},          {"overlap", "overlap-sweep"},      {"length", "length-sweep"},
    {"diameter", "diameter-scaling"}, {"local", "local-census"},      {"kernel", "kernel-pipeline"},
    {"lattice", "free-energy-sweep"}, {"diagnose", "diagnostics"},    {"mst-prob", "mst-equality"},
    {"run", ""}};

struct Flags {
  std::string config, graph, law, beta, beta_grid, out, tree_out;
  std::size_t replicas = 0, workers = 0;
  std::uint64_t seed = 0;
  bool exact = false, timing = false;
  std::vector<std::string> params;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "key=value config file; flags override it");
  sub->add_option("--graph", f.graph, "complete:N, box:L:d, torus:L:d, regular:N:d, path:N, cycle:N, star:N or an edge-list path");
  sub->add_option("--law", f.law, "disorder law, e.g. uniform01 or \"power_tail alpha=2\"");
  sub->add_option("--beta", f.beta, "inverse temperature (may use n, n^k, log(n))");
  sub->add_option("--beta-grid", f.beta_grid, "a:b:step or a comma list");
  sub->add_option("--replicas", f.replicas, "replica count");
  sub->add_option("--seed", f.seed, "master seed (default $RSTRE_SEED or 0)");
  sub->add_option("--workers", f.workers, "worker threads");
  sub->add_option("--out", f.out, "CSV output path (stdout when absent)");
  sub->add_flag("--exact", f.exact, "use exact (Kirchhoff / enumeration) values where available");
  sub->add_flag("--timing", f.timing, "record wall_ms per replica");
  sub->add_option("--param", f.params, "extra key=value parameter (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random spanning trees in random environment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rstre::kVersion);
  Flags f;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [verb, ex] : kVerbs) {
    auto* sub = app.add_subcommand(verb, ex.empty() ? "run the experiment named in --config" : "experiment " + ex);
    add_common(sub, f);
    if (verb == "sample") sub->add_option("--tree-out", f.tree_out, "write replica 0's tree as an edge list");
    subs[verb] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string verb;
  for (const auto& [v, sub] : subs)
    if (sub->parsed()) verb = v;
  CLI::App* sub = subs[verb];

  rstre::ExperimentConfig cfg;
  try {
    if (const char* env = std::getenv("RSTRE_SEED")) cfg.seed = rstre::parse_unsigned(env);
    if (!f.config.empty()) cfg = rstre::read_config_file(f.config, cfg);
    if (!kVerbs.at(verb).empty()) cfg.experiment = kVerbs.at(verb);
    if (sub->count("--graph")) cfg.graph = f.graph;
    if (sub->count("--law")) cfg.law = f.law;
    if (sub->count("--beta")) cfg.betas = rstre::expand_beta_grid(f.beta);
    if (sub->count("--beta-grid")) cfg.betas = rstre::expand_beta_grid(f.beta_grid);
    if (sub->count("--replicas")) cfg.replicas = f.replicas;
    if (sub->count("--seed")) cfg.seed = f.seed;
    if (sub->count("--workers")) cfg.workers = f.workers;
    if (sub->count("--out")) cfg.out = f.out;
    if (f.exact) cfg.exact = true;
    if (f.timing) cfg.timing = true;
    for (const auto& kv : f.params) {
      auto eq = kv.find('=');
      rstre::require(eq != std::string::npos, rstre::ErrorKind::Parse, "--param needs key=value");
      rstre::apply_config_line(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.law = rstre::format_law(rstre::parse_law(cfg.law));
    if (cfg.experiment.empty()) rstre::fail(rstre::ErrorKind::InvalidArgument, "no experiment named");
  } catch (const rstre::Error& e) {
    std::cerr << "rstre: " << e.what() << '\n';
    return e.kind() == rstre::ErrorKind::Io ? 3 : 1;
  }

  try {
    auto result = rstre::run_experiment(cfg);
    auto comment = rstre::header_comment(cfg);
    if (cfg.out.empty()) {
      std::cout << rstre::render_csv(result.rows, comment);
    } else {
      rstre::write_csv(result.rows, cfg.out, comment);
    }
    if (verb == "sample" && !f.tree_out.empty()) {
      auto s = rstre::sample_replica_tree(cfg, 0);
      auto tg = rstre::edge_subgraph(s.graph, s.tree.edges);
      std::vector<double> om;
      for (auto e : s.tree.edges) om.push_back(s.omega[e]);
      std::ostringstream text;
      rstre::write_edge_list(text, tg, &om);
      rstre::write_text_atomic(f.tree_out, text.str());
    }
    if (result.failed_replicas > 0)
      std::cerr << "rstre: " << result.failed_replicas << " replica(s) failed; see error rows\n";
    if (result.failed_checks > 0) {
      std::cerr << "rstre: " << result.failed_checks << " check(s) failed\n";
      return 2;
    }
    return 0;
  } catch (const rstre::Error& e) {
    std::cerr << "rstre: " << e.what() << '\n';
    if (e.kind() == rstre::ErrorKind::InvalidArgument || e.kind() == rstre::ErrorKind::Parse) return 1;
    return e.kind() == rstre::ErrorKind::CheckFailed ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "rstre: " << e.what() << '\n';
    return 3;
  }
}
