#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ridepool/experiment.hpp"

using namespace ridepool;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "ridepool_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ScenarioConfig small_config(const fs::path& dir) {
  std::istringstream text(
      "grid.rows = 5\n"
      "grid.cols = 5\n"
      "demand.communities = 4\n"
      "demand.points_per_community = 3\n"
      "demand.hot_communities = 1\n"
      "demand.peak_rate = 4\n"
      "horizon = 6\n"
      "history_days = 3\n"
      "fleet_size = 4\n"
      "iterations = 3\n"
      "replicates = 2\n"
      "seed = 9\n");
  ScenarioConfig c = read_config(text);
  c.output_dir = dir.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

int run_cli(const std::string& args) {
  const std::string cmd = fmt::format("\"{}\" {} >/dev/null 2>&1", RIDEPOOL_CLI, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream text(
      "# comment\n"
      "  wait_delay = 90  \n"
      "groups_max=3\n"
      "zone_counts = 25,4,1\n"
      "policies = myopic\n"
      "sweep.capacity_max = 4,8\n");
  ScenarioConfig c = read_config(text);
  CHECK(c.limits.wait_max == 90);
  CHECK(c.limits.delay_max == 90);
  CHECK(c.limits.groups_max == 3);
  CHECK(c.zone_counts == std::vector<int>{25, 4, 1});
  CHECK(c.wants("myopic"));
  CHECK_FALSE(c.wants("adp"));
  REQUIRE(c.sweep.size() == 1);
  CHECK(c.sweep[0].first == "capacity_max");
  CHECK(c.sweep[0].second == std::vector<std::string>{"4", "8"});

  std::ostringstream out;
  write_config(c, out);
  std::istringstream back(out.str());
  ScenarioConfig again = read_config(back);
  std::ostringstream out2;
  write_config(again, out2);
  CHECK(out.str() == out2.str());

  for (const char* bad : {"nonsense = 1\n", "groups_max = two\n", "groups_max = 0\n", "policies = greedy\n",
                          "rebalancing = maybe\n", "wait_max\n", "sweep.nonsense = 1,2\n"}) {
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_config(in), ConfigError);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/ridepool.cfg"), ConfigError);
}

TEST_CASE("sweep expansion") {
  ScenarioConfig base;
  CHECK(expand_sweep(base).size() == 1);
  CHECK(expand_sweep(base)[0].label == "base");

  std::istringstream text("sweep.wait_delay = 60,120\nsweep.groups_max = 1,2,3\n");
  ScenarioConfig c = read_config(text);
  std::vector<SweepPoint> points = expand_sweep(c);
  REQUIRE(points.size() == 6);
  CHECK(points[0].label == "wait_delay=60;groups_max=1");
  CHECK(points[2].label == "wait_delay=60;groups_max=3");
  CHECK(points[5].label == "wait_delay=120;groups_max=3");
  CHECK(points[4].config.limits.wait_max == 120);
  CHECK(points[4].config.limits.groups_max == 2);
  for (const SweepPoint& p : points) CHECK(p.config.sweep.empty());
}

TEST_CASE("summary statistics") {
  auto run = [](const std::string& policy, int r, int seen, int served) {
    ReplicateRun x;
    x.policy = policy;
    x.replicate = r;
    EpochMetrics m;
    m.epoch = 1;
    m.seen = seen;
    m.served = served;
    x.metrics.epochs = {m};
    return x;
  };
  SummaryRow row = summarize("p", {run("myopic", 1, 10, 4), run("adp", 1, 10, 6), run("myopic", 2, 20, 8),
                                   run("adp", 2, 20, 12)});
  CHECK(row.replicates == 2);
  CHECK(row.seen_mean == 15.0);
  CHECK(row.served.at("myopic").mean == 6.0);
  CHECK(row.served.at("myopic").std == doctest::Approx(std::sqrt(8.0)));
  CHECK(row.served.at("adp").mean == 9.0);
  CHECK(row.served.at("adp").std == doctest::Approx(std::sqrt(18.0)));
  REQUIRE(row.pct_improvement.has_value());
  CHECK(*row.pct_improvement == doctest::Approx(20.0));

  SummaryRow lone = summarize("q", {run("myopic", 1, 5, 3)});
  CHECK(lone.served.at("myopic").std == 0.0);
  CHECK_FALSE(lone.pct_improvement.has_value());
  std::ostringstream out;
  write_summary_csv({lone}, out);
  CHECK(out.str() == "point,replicates,seen_mean,myopic_mean,myopic_std,adp_mean,adp_std,pct_improvement\n"
                     "q,1,5,3,0,,,\n");
}

TEST_CASE("generate, train, evaluate") {
  const fs::path dir = scratch("pipeline");
  ScenarioConfig c = small_config(dir);

  ScenarioConfig only_model = c;
  only_model.replicates = 0;
  cmd_generate(only_model);
  CHECK(fs::exists(dir / "model.txt"));
  CHECK(fs::exists(dir / "network.txt"));
  CHECK_FALSE(fs::exists(dir / "requests_1.csv"));

  cmd_generate(c);
  CHECK(fs::exists(dir / "requests_1.csv"));
  CHECK(fs::exists(dir / "requests_2.csv"));

  CHECK_THROWS_AS(cmd_evaluate(c), ConfigError);  // no table yet

  TrainingResult trained = cmd_train(c);
  CHECK(trained.log.size() == 3);
  CHECK(load_value_table(c.table_path()) == trained.table);
  auto log = csv(dir / "training_log.csv");
  REQUIRE(log.size() == 4);
  CHECK(log[3][0] == "3");

  std::vector<SummaryRow> rows = cmd_evaluate(c);
  REQUIRE(rows.size() == 1);

  // The summary must follow from the per-replicate metrics files.
  for (const char* policy : {"myopic", "adp"}) {
    std::vector<double> served;
    double seen = 0.0;
    for (int r = 1; r <= 2; ++r) {
      auto m = csv(dir / fmt::format("metrics_{}_{}.csv", policy, r));
      REQUIRE(m.size() == 7);
      CHECK(m[0][1] == "seen");
      CHECK(m[0][2] == "served");
      long s = 0;
      for (std::size_t i = 1; i < m.size(); ++i) {
        s += std::stol(m[i][2]);
        seen += std::stod(m[i][1]);
      }
      served.push_back(static_cast<double>(s));
    }
    const double mean = (served[0] + served[1]) / 2.0;
    const double sd = std::abs(served[0] - served[1]) / std::sqrt(2.0);
    CHECK(rows[0].served.at(policy).mean == doctest::Approx(mean));
    CHECK(rows[0].served.at(policy).std == doctest::Approx(sd));
    CHECK(rows[0].seen_mean == doctest::Approx(seen / 2.0));
  }
  auto summary = csv(dir / "summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[1][0] == "base");

  // Resuming extends numbering and equals one longer run.
  ScenarioConfig more = c;
  more.resume = true;
  more.iterations = 2;
  cmd_train(more);
  log = csv(dir / "training_log.csv");
  REQUIRE(log.size() == 6);
  CHECK(log[4][0] == "4");
  CHECK(log[5][0] == "5");

  const fs::path dir2 = scratch("pipeline_long");
  ScenarioConfig longer = small_config(dir2);
  longer.iterations = 5;
  CHECK(cmd_train(longer).table == load_value_table(c.table_path()));
}

TEST_CASE("runs are byte-identical") {
  const fs::path a = scratch("repeat_a");
  const fs::path b = scratch("repeat_b");
  cmd_train(small_config(a));
  cmd_evaluate(small_config(a));
  cmd_train(small_config(b));
  cmd_evaluate(small_config(b));
  for (const char* f : {"value_table.txt", "training_log.csv", "summary.csv", "metrics_adp_1.csv",
                        "metrics_myopic_2.csv"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("sweep writes one row per point") {
  const fs::path dir = scratch("sweep");
  ScenarioConfig c = small_config(dir);
  c.replicates = 1;
  c.sweep = {{"groups_max", {"1", "2"}}};
  std::vector<SummaryRow> rows = cmd_sweep(c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].point == "groups_max=1");
  CHECK(rows[1].point == "groups_max=2");
  CHECK(fs::exists(dir / "point_1" / "value_table.txt"));
  CHECK(fs::exists(dir / "point_2" / "metrics_adp_1.csv"));
  CHECK(csv(dir / "summary.csv").size() == 3);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  const std::string small = "-s grid.rows=4 -s grid.cols=4 -s demand.communities=2 -s demand.points_per_community=2 "
                            "-s horizon=4 -s history_days=2 -s fleet_size=3 -s iterations=2 -s replicates=1";
  CHECK(run_cli(fmt::format("generate {} -o {}", small, (dir / "ok").string())) == 0);
  CHECK(fs::exists(dir / "ok" / "requests_1.csv"));
  CHECK(run_cli(fmt::format("train {} -o {}", small, (dir / "ok").string())) == 0);
  CHECK(run_cli(fmt::format("evaluate {} -o {}", small, (dir / "ok").string())) == 0);
  CHECK(run_cli("generate --print-config") == 0);

  CHECK(run_cli("") == 1);
  CHECK(run_cli("launch") == 1);
  CHECK(run_cli("train -s no_such_key=1") == 1);
  CHECK(run_cli("train -s groups_max=0") == 1);
  CHECK(run_cli("train -c /nonexistent/ridepool.cfg") == 1);
  CHECK(run_cli(fmt::format("evaluate {} -o {}", small, (dir / "missing").string())) == 1);

  // A file where the output directory should be cannot be written.
  std::ofstream(dir / "blocker") << "x";
  CHECK(run_cli(fmt::format("generate {} -o {}", small, (dir / "blocker" / "out").string())) == 2);
}
