#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mtts/bench/config.hpp"
#include "mtts/bench/experiment.hpp"
#include "mtts/bench/io.hpp"
#include "mtts/bench/plot.hpp"
#include "mtts/bench/validate.hpp"

using namespace mtts;
using namespace mtts::bench;

namespace {

const char* kMinimal = R"(
population:
  reward: gaussian
  tasks: 4
  horizon: 8
  arms: 2
  dim: 3
  sigma1_sq: 0.25
  seed: 7
schedule: concurrent
seeds: 2
parallelism: 2
mtr: true
algorithms:
  - name: mtts
  - name: oracle_ts
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mtts_test_bench_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
  return p;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

int run_cli(const std::string& args) {
  const char* bin = std::getenv("MTTS_BENCH");
  if (bin == nullptr) return -1;
  const int raw = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST_CASE("config parsing validates keys exhaustively") {
  const auto cfg = parse_config(YAML::Load(kMinimal));
  CHECK(cfg.population.tasks == 4);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(cfg.algorithms.size() == 2);

  auto bad = [](const std::string& text) { return parse_config(YAML::Load(text)); };
  CHECK_THROWS_AS(bad(std::string(kMinimal) + "colour: red\n"), ConfigError);
  CHECK_THROWS_AS(bad("population: {tasks: 4, horizn: 3}\nseeds: 1\nalgorithms: [{name: mtts}]\n"), ConfigError);
  CHECK_THROWS_AS(bad("population: {tasks: 4}\nseeds: 1\n"), ConfigError);
  CHECK_THROWS_AS(bad("population: {tasks: 4}\nseeds: 1\nalgorithms: [{name: nope}]\n"), ConfigError);
  CHECK_THROWS_AS(bad("population: {tasks: 4}\nseeds: 1\nalgorithms: [{name: mtts, refrsh: 3}]\n"), ConfigError);
  CHECK_THROWS_AS(bad("population: {tasks: 4}\nseeds: [1, 1]\nalgorithms: [{name: mtts}]\n"), ConfigError);
  CHECK_THROWS_AS(bad("population: {tasks: 4}\nseeds: 1\nalgorithms: [{name: mtts}, {name: mtts}]\n"), ConfigError);
}

TEST_CASE("seed lists, refresh values and mtr") {
  const auto cfg = parse_config(YAML::Load(
      "population: {tasks: 3}\nseeds: [5, 9]\nmtr: true\n"
      "algorithms: [{name: mtts_approx, label: b, refresh: never}, {name: meta_ts, refresh: 4}, {name: osfa, refresh: auto}]\n"));
  CHECK(cfg.seeds == std::vector<std::uint64_t>{5, 9});
  REQUIRE(cfg.algorithms.size() == 4);
  CHECK(cfg.algorithms[0].label == "b");
  CHECK(cfg.algorithms[0].refresh == kNeverRefresh);
  CHECK(cfg.algorithms[1].refresh == 4u);
  CHECK_FALSE(cfg.algorithms[2].refresh.has_value());
  CHECK(cfg.find_policy(PolicyKind::OracleTs) != nullptr);
}

TEST_CASE("full-size recipe configs parse") {
  for (const char* name : {"full_sigma1_0.25.yaml", "full_sigma1_0.5.yaml", "full_sigma1_1.yaml"}) {
    const auto cfg = load_config(fs::path(MTTS_SOURCE_DIR) / "configs" / name);
    CHECK(cfg.population.tasks == 200);
    CHECK(cfg.population.horizon == 200);
    CHECK(cfg.population.arms == 8);
    CHECK(cfg.population.dim == 15);
  }
  for (const auto& entry : fs::directory_iterator(fs::path(MTTS_SOURCE_DIR) / "configs"))
    CHECK_NOTHROW(load_config(entry.path()));
}

TEST_CASE("CSV output uses 17 significant digits and a header") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CsvBuilder empty({"x", "y"});
  CHECK(empty.str() == "x,y\n");
  CsvBuilder b({"x"});
  b.row({format_double(1.0 / 3.0)});
  CHECK(b.str() == "x\n0.33333333333333331\n");
}

TEST_CASE("minimal run writes every artifact and reruns identically") {
  const auto dir = scratch("run");
  const auto cfg = parse_config(YAML::Load(kMinimal));
  run_experiment(cfg, dir / "a");
  for (const char* f : {"ledger.csv", "curves.csv", "summary.csv", "manifest.json", "regret_per_round.svg",
                        "regret_per_task.svg", "mtr_per_task.svg"})
    CHECK(fs::exists(dir / "a" / f));
  const auto ledger = read_file(dir / "a" / "ledger.csv");
  CHECK(first_line(ledger) == "algorithm,seed,task_id,round,arm,reward,inst_regret");
  CHECK(first_line(read_file(dir / "a" / "curves.csv")) == "algorithm,view,index,mean,se");
  CHECK(first_line(read_file(dir / "a" / "summary.csv")).find("ratio_vs_individual_ts") != std::string::npos);
  // 2 algorithms x 2 seeds x 4 tasks x 8 rounds
  CHECK(std::count(ledger.begin(), ledger.end(), '\n') == 1 + 2 * 2 * 4 * 8);
  CHECK(read_file(dir / "a" / "regret_per_round.svg").starts_with("<svg"));

  run_experiment(cfg, dir / "b");
  CHECK(read_file(dir / "b" / "ledger.csv") == ledger);

  const auto replay = load_config(dir / "a" / "manifest.json");
  run_experiment(replay, dir / "c");
  CHECK(read_file(dir / "c" / "ledger.csv") == ledger);
  CHECK(read_file(dir / "c" / "manifest.json") == read_file(dir / "a" / "manifest.json"));

  auto serial = cfg;
  serial.parallelism = 1;
  run_experiment(serial, dir / "d");
  CHECK(read_file(dir / "d" / "ledger.csv") == ledger);
  fs::remove_all(dir);
}

TEST_CASE("Bernoulli and sequential runs complete") {
  const auto dir = scratch("bern");
  const auto cfg = parse_config(YAML::Load(
      "population: {reward: bernoulli, tasks: 3, horizon: 6, arms: 2, dim: 3, seed: 2}\n"
      "schedule: sequential\nseeds: 2\nplots: false\nprior_mc_samples: 2000\n"
      "algorithms: [{name: mtts, mcmc_samples: 30, mcmc_burn_in: 30}, {name: meta_ts, candidates: 3},"
      " {name: individual_ts}, {name: osfa}, {name: oracle_ts}]\n"));
  const auto art = run_experiment(cfg, dir);
  CHECK(art.files.size() == 4);
  const auto ledger = read_file(dir / "ledger.csv");
  CHECK(std::count(ledger.begin(), ledger.end(), '\n') == 1 + 5 * 2 * 3 * 6);
  fs::remove_all(dir);
}

TEST_CASE("export-population writes per-seed CSVs") {
  const auto dir = scratch("export");
  const auto cfg = parse_config(YAML::Load(kMinimal));
  const auto files = export_population(cfg, dir);
  CHECK(files.size() == 4);
  const auto pop = read_file(dir / "population_seed0.csv");
  CHECK(first_line(pop).starts_with("task_id"));
  CHECK(std::count(pop.begin(), pop.end(), '\n') == 1 + 4);
  CHECK(first_line(read_file(dir / "population_seed1_theta.csv")) == "index,theta");
  fs::remove_all(dir);
}

TEST_CASE("unwritable output directory is an error") {
  const auto dir = scratch("unwritable");
  write_text(dir / "file", "x");
  const auto cfg = parse_config(YAML::Load(kMinimal));
  CHECK_THROWS_AS(run_experiment(cfg, dir / "file" / "sub"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("fault-injected Woodbury path fails path-equivalence") {
  const PosteriorFn flipped = [](const HierarchyConfig& c, const FeatureMap& fm, const History& h,
                                 const MetadataLookup& look, TaskId i, const Vector& x) {
    auto b = posterior_r_woodbury(c, fm, h, look, i, x);
    b.mean = -b.mean;
    return b;
  };
  const auto good = posterior_suite();
  CHECK(good.passed());
  const auto bad = posterior_suite(flipped);
  CHECK_FALSE(bad.passed());
  const auto failing = bad.failing();
  CHECK(std::find(failing.begin(), failing.end(), "path-equivalence") != failing.end());
}

TEST_CASE("conjugacy and regret suites pass") {
  CHECK(run_suite("conjugacy").passed());
  CHECK(run_suite("regret").passed());
  CHECK_THROWS_AS(run_suite("nope"), ConfigError);
}

TEST_CASE("CLI exit codes") {
  if (std::getenv("MTTS_BENCH") == nullptr) SKIP("MTTS_BENCH not set");
  const auto dir = scratch("cli");
  const auto good = write_text(dir / "good.yaml", kMinimal);
  const auto bad = write_text(dir / "bad.yaml", std::string(kMinimal) + "typo: 1\n");

  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("run " + bad.string()) == 1);
  CHECK(run_cli("run " + (dir / "missing.yaml").string()) == 1);
  CHECK(run_cli("validate --suite bogus") == 1);
  CHECK(run_cli("validate --suite conjugacy") == 0);
  CHECK(run_cli("run " + good.string() + " -o " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "ledger.csv"));
  CHECK(run_cli("run " + (dir / "out" / "manifest.json").string() + " -o " + (dir / "again").string()) == 0);
  CHECK(read_file(dir / "again" / "ledger.csv") == read_file(dir / "out" / "ledger.csv"));

  const std::string env = std::string(kOutputRootEnv) + "=" + (dir / "root").string() + " ";
  const char* bin = std::getenv("MTTS_BENCH");
  const int raw = std::system((env + bin + " export-population " + good.string() + " -o pop >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(raw) == 0);
  CHECK(fs::exists(dir / "root" / "pop" / "population_seed0.csv"));
  fs::remove_all(dir);
}
