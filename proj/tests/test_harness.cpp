#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rstre/harness.hpp"

using namespace rstre;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "rstre_harness_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const std::string& env = {}) {
  std::string cmd = env + (env.empty() ? "" : " ") + std::string(RSTRE_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_stdout(const std::string& args, const std::string& env = {}) {
  auto out = scratch("stdout.txt");
  std::string cmd = env + (env.empty() ? "" : " ") + std::string(RSTRE_CLI) + " " + args + " >" + out.string() +
                    " 2>/dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0) << cmd;
  return slurp(out);
}

// Rows without the header comment block.
std::string body(const std::string& csv) {
  std::string out;
  for (const auto& line : split(csv, '\n'))
    if (line.rfind("#", 0) != 0) out += line + '\n';
  return out;
}

ExperimentConfig random_config(std::mt19937_64& rng) {
  const auto& names = experiment_names();
  const std::vector<std::string> graphs{"complete:10", "box:3:2", "regular:20:3:5", "path:7", "complete:1000,2000"};
  const std::vector<std::string> laws{"uniform01", "power_tail alpha=2 c_mu=1 rho=1", "bounded a=-1 b=2",
                                      "gaussian mean=0 variance=2"};
  const std::vector<std::string> betas{"0", "1.5", "n^2", "2*n*log(n)^3", "log(n)"};
  ExperimentConfig c;
  c.experiment = names[rng() % names.size()];
  c.graph = graphs[rng() % graphs.size()];
  c.law = format_law(parse_law(laws[rng() % laws.size()]));
  c.betas.clear();
  for (std::size_t i = 0, k = 1 + rng() % 3; i < k; ++i) c.betas.push_back(betas[rng() % betas.size()]);
  c.replicas = 1 + rng() % 1000;
  c.seed = rng();
  c.workers = 1 + rng() % 16;
  c.out = rng() % 2 ? "" : "results/run" + std::to_string(rng() % 100) + ".csv";
  c.exact = rng() % 2;
  c.timing = rng() % 2;
  if (rng() % 2) c.params["eps"] = format_number(0.01 * static_cast<double>(rng() % 100));
  if (rng() % 2) c.params["tol.coupling"] = "1e-9";
  return c;
}

}  // namespace

TEST(Csv, Quoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  ResultRow r{"x,y", 3, 0.5, 2, "obs", 1.25, 0.125, 0, 42};
  EXPECT_EQ(format_row(r), "\"x,y\",3,0.5,2,obs,1.25,0.125,0,42");
}

TEST(Csv, EmptyRowsGiveHeaderOnly) {
  EXPECT_EQ(render_csv({}), std::string(kCsvHeader) + "\n");
  EXPECT_EQ(std::string(kCsvHeader), "experiment,n,beta,replica,observable,value,stderr,wall_ms,seed");
}

TEST(Csv, AtomicWriteIsRepeatable) {
  auto path = scratch("rows.csv");
  std::vector<ResultRow> rows{{"e", 4, 1, 0, "v", 0.1, 0, 0, 7}, {"e", 4, 1, 1, "v", 0.2, 0, 0, 8}};
  write_csv(rows, path.string(), "note");
  auto first = slurp(path);
  EXPECT_EQ(first, "# note\n" + std::string(kCsvHeader) + "\ne,4,1,0,v,0.1,0,0,7\ne,4,1,1,v,0.2,0,0,8\n");
  write_csv(rows, path.string(), "note");
  EXPECT_EQ(slurp(path), first);
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
  try {
    write_csv(rows, "/nonexistent-dir/rows.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/rows.csv"), std::string::npos);
  }
}

TEST(Numbers, FormatRoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    double x = u(rng) * std::pow(10.0, static_cast<double>(rng() % 40) - 20);
    EXPECT_EQ(parse_number(format_number(x)), x);
  }
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_THROW(parse_number("1.5x"), Error);
  EXPECT_THROW(parse_unsigned("-3"), Error);
}

TEST(Beta, Expressions) {
  EXPECT_DOUBLE_EQ(eval_beta("n^2", 10), 100);
  EXPECT_DOUBLE_EQ(eval_beta("30", 10), 30);
  EXPECT_NEAR(eval_beta("log(n)", 100), std::log(100.0), 1e-12);
  EXPECT_NEAR(eval_beta("n*log(n)^3", 64), 64 * std::pow(std::log(64.0), 3), 1e-9);
  EXPECT_NEAR(eval_beta("10*n^2*log(n)", 8), 10 * 64 * std::log(8.0), 1e-9);
  EXPECT_THROW(eval_beta("m^2", 10), Error);
  EXPECT_THROW(eval_beta("-1", 10), Error);
  EXPECT_THROW(eval_beta("2**n", 10), Error);
}

TEST(Beta, Grids) {
  auto g = expand_beta_grid("0:0.4:0.02");
  ASSERT_EQ(g.size(), 21u);
  EXPECT_NEAR(parse_number(g.back()), 0.4, 1e-12);
  EXPECT_EQ(expand_beta_grid("1, n^2"), (std::vector<std::string>{"1", "n^2"}));
  EXPECT_THROW(expand_beta_grid("1:0:0.1"), Error);
  EXPECT_THROW(expand_beta_grid(""), Error);
}

TEST(GraphSpecs, Parsing) {
  auto s = parse_graph_specs("complete:1000,2000");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].params[0], 2000u);
  EXPECT_EQ(format_graph_spec(parse_graph_specs("box:3:2").front()), "box:3:2");
  EXPECT_EQ(build_graph(parse_graph_specs("cycle:5").front()).graph.m(), 5u);
  EXPECT_EQ(build_graph(parse_graph_specs("star:6").front()).graph.m(), 5u);
  EXPECT_THROW(parse_graph_specs("box:3"), Error);
  EXPECT_THROW(parse_graph_specs("complete:x"), Error);
}

TEST(Config, FileSyntax) {
  auto c = parse_config("# comment\nexperiment = overlap-sweep\ngraph=complete:5  # trailing\n\nbeta=0:1:0.5\neps=0.3\n");
  EXPECT_EQ(c.experiment, "overlap-sweep");
  EXPECT_EQ(c.graph, "complete:5");
  EXPECT_EQ(c.betas.size(), 3u);
  EXPECT_EQ(c.param("eps", 0.0), 0.3);
  try {
    parse_config("graph=complete:5\nreplicas\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_config("exact=maybe\n"), Error);
}

TEST(Property, ConfigRoundTripsThroughHeader) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto c = random_config(rng);
    auto csv = render_csv({}, header_comment(c));
    EXPECT_EQ(parse_config(csv, {}, true), c) << csv;
    EXPECT_EQ(parse_config(format_config(c)), c);
  }
}

TEST(Replicas, SeedsAreDistinct) {
  std::set<std::uint64_t> s;
  for (std::size_t r = 0; r < 10000; ++r) s.insert(replica_seed(5, r));
  EXPECT_EQ(s.size(), 10000u);
  EXPECT_NE(replica_seed(5, 0), replica_seed(6, 0));
}

TEST(RunIndexed, OrderedByIndex) {
  auto out = run_indexed<std::size_t>(1000, 8, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], i * i);
}

TEST(Experiment, OverlapExactOnTriangle) {
  ExperimentConfig c;
  c.experiment = "overlap-sweep";
  c.graph = "complete:3";
  c.betas = {"0"};
  c.replicas = 2;
  c.exact = true;
  auto r = run_experiment(c);
  int seen = 0;
  for (const auto& row : r.rows)
    if (row.observable == "edge_overlap") {
      EXPECT_NEAR(row.value, 4.0 / 3, 1e-12);
      ++seen;
    }
  EXPECT_EQ(seen, 2);
}

TEST(Experiment, DiameterOfTreeIsDeterministic) {
  ExperimentConfig c;
  c.experiment = "diameter-scaling";
  c.graph = "path:12";
  c.betas = {"0", "5"};
  c.replicas = 5;
  auto r = run_experiment(c);
  for (const auto& row : r.rows)
    if (row.observable == "diameter" || row.observable == "median_diameter") {
      EXPECT_EQ(row.value, 11);
    }
}

TEST(Experiment, WorkerCountDoesNotChangeOutput) {
  for (std::string ex : {"diameter-scaling", "local-census", "overlap-sweep", "length-sweep", "sample"}) {
    ExperimentConfig c;
    c.experiment = ex;
    c.graph = "complete:25";
    c.betas = {"0.5", "n"};
    c.replicas = 24;
    c.seed = 99;
    c.workers = 1;
    auto one = render_csv(run_experiment(c).rows);
    c.workers = 8;
    auto eight = render_csv(run_experiment(c).rows);
    EXPECT_EQ(one, eight) << ex;
  }
}

TEST(Experiment, ReplicaDependsOnlyOnSeedAndIndex) {
  ExperimentConfig c;
  c.experiment = "sample";
  c.graph = "complete:20";
  c.seed = 3;
  c.replicas = 4;
  auto few = run_experiment(c).rows;
  c.replicas = 9;
  c.workers = 3;
  auto many = run_experiment(c).rows;
  std::size_t k = 0;
  for (const auto& row : few)
    if (row.replica >= 0) {
      EXPECT_EQ(format_row(row), format_row(many[k]));
      ++k;
    }
  EXPECT_GT(k, 0u);
}

TEST(Experiment, FailedReplicaWritesErrorRow) {
  auto path = scratch("split.edges");
  std::ofstream(path) << "4\n0 1\n2 3\n";
  ExperimentConfig c;
  c.experiment = "length-sweep";
  c.graph = path.string();
  c.exact = true;
  c.replicas = 3;
  auto r = run_experiment(c);
  EXPECT_EQ(r.failed_replicas, 3u);
  int errors = 0;
  for (const auto& row : r.rows) errors += row.observable == "error:disconnected";
  EXPECT_EQ(errors, 3);
  c.experiment = "no-such-thing";
  EXPECT_THROW(run_experiment(c), Error);
}

TEST(Experiment, FreeEnergySweep) {
  ExperimentConfig c;
  c.experiment = "free-energy-sweep";
  c.graph = "box:1:2";
  c.betas = {"0"};
  c.replicas = 1;
  auto r = run_experiment(c);
  bool found = false;
  for (const auto& row : r.rows)
    if (row.observable == "free_energy_free" && row.replica == 0) {
      EXPECT_NEAR(row.value, std::log(192.0) / 9, 1e-12);
      EXPECT_EQ(row.n, 9u);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(Cli, ExitCodes) {
  auto out = scratch("cli.csv");
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli("overlap --bogus"), 1);
  EXPECT_EQ(run_cli("overlap --graph complete:3 --beta foo"), 1);
  EXPECT_EQ(run_cli("overlap --graph complete:3 --law \"weird x=1\""), 1);
  EXPECT_EQ(run_cli("overlap --graph complete:3 --beta 0 --exact --replicas 2 --out " + out.string()), 0);
  EXPECT_NE(slurp(out).find(kCsvHeader), std::string::npos);
  EXPECT_EQ(run_cli("overlap --graph complete:3 --out /nonexistent-dir/x.csv"), 3);
  EXPECT_EQ(run_cli("overlap --graph /nonexistent-dir/g.edges"), 3);
  EXPECT_EQ(run_cli("run --config /nonexistent-dir/c.cfg"), 3);
  // A negative coupling tolerance makes the acceptance-tagged check fail.
  EXPECT_EQ(run_cli("kernel --graph complete:6 --law uniform01 --exact --replicas 1 --param eps=3 "
                    "--param tol.coupling=-1"),
            2);
}

TEST(Cli, SeedPrecedence) {
  auto cfg = scratch("seed.cfg");
  std::ofstream(cfg) << "experiment=sample\ngraph=complete:12\nreplicas=3\nseed=11\n";
  auto from_file = cli_stdout("run --config " + cfg.string());
  auto from_env = cli_stdout("sample --graph complete:12 --replicas 3", "RSTRE_SEED=11");
  auto from_flag = cli_stdout("sample --graph complete:12 --replicas 3 --seed 11", "RSTRE_SEED=4");
  EXPECT_EQ(body(from_file), body(from_env));
  EXPECT_EQ(body(from_file), body(from_flag));
  auto overridden = cli_stdout("run --config " + cfg.string() + " --seed 12");
  EXPECT_NE(body(from_file), body(overridden));
  EXPECT_NE(overridden.find("# seed=12"), std::string::npos);
}

TEST(Cli, OutputRoundTripsConfig) {
  auto text = cli_stdout("diameter --graph complete:15 --beta-grid 0:1:0.5 --replicas 2 --seed 5 --param eps=0.1");
  auto c = parse_config(text, {}, true);
  EXPECT_EQ(c.experiment, "diameter-scaling");
  EXPECT_EQ(c.betas, (std::vector<std::string>{"0", "0.5", "1"}));
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.params.at("eps"), "0.1");
}

TEST(Cli, TreeOut) {
  auto tree = scratch("tree.edges");
  EXPECT_EQ(run_cli("sample --graph box:2:2 --beta 1 --replicas 1 --tree-out " + tree.string()), 0);
  auto t = read_edge_list(tree.string());
  EXPECT_EQ(t.graph.n(), 25u);
  EXPECT_EQ(t.graph.m(), 24u);
  EXPECT_TRUE(t.graph.connected());
}
