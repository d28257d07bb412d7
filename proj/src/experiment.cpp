#include "ridepool/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "text_util.hpp"

namespace ridepool {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

TrainingConfig training_config(const ScenarioConfig& config) {
  TrainingConfig t;
  t.iterations = config.iterations;
  t.fleet_size = config.fleet_size;
  t.rebalancing = config.rebalancing;
  t.seed = config.seed;
  return t;
}

int last_logged_iteration(const fs::path& log) {
  std::ifstream in(log);
  if (!in) return 0;
  int last = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = detail::split(line, ',');
    if (fields.empty() || !detail::is_int(fields[0])) continue;
    last = static_cast<int>(detail::parse_int(fields[0], line_no));
  }
  return last;
}

}  // namespace

std::vector<SweepPoint> expand_sweep(const ScenarioConfig& config) {
  std::vector<SweepPoint> points{{"", config}};
  for (const auto& [axis, values] : config.sweep) {
    std::vector<SweepPoint> next;
    for (const SweepPoint& p : points) {
      for (const std::string& v : values) {
        SweepPoint q = p;
        apply_setting(q.config, axis, v);
        q.label += (q.label.empty() ? "" : ";") + axis + "=" + v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  for (SweepPoint& p : points) {
    p.config.sweep.clear();
    if (p.label.empty()) p.label = "base";
  }
  return points;
}

SamplePath replicate_path(const ScenarioConfig& config, const Scenario& scenario, int replicate) {
  return sample_path(scenario.model, scenario.horizon,
                     derive_seed(config.seed, 10, static_cast<std::uint64_t>(replicate)), scenario.deadline_rule());
}

std::vector<Vehicle> replicate_fleet(const ScenarioConfig& config, const Scenario& scenario, int replicate) {
  return random_fleet(config.fleet_size, scenario.network.node_count(),
                      derive_seed(config.seed, 11, static_cast<std::uint64_t>(replicate)));
}

std::vector<ReplicateRun> evaluate_policies(const ScenarioConfig& config, const Scenario& scenario,
                                            const ValueTable* table) {
  const Environment env = scenario.environment();
  std::vector<ReplicateRun> runs;
  for (int r = 1; r <= config.replicates; ++r) {
    SamplePath path = replicate_path(config, scenario, r);
    std::vector<Vehicle> fleet = replicate_fleet(config, scenario, r);
    for (const std::string& name : config.policies) {
      Policy policy;
      policy.rebalancing = config.rebalancing;
      if (name == "adp") {
        if (table == nullptr) throw ConfigError("the adp policy needs a trained value table");
        policy.kind = PolicyKind::Adp;
        policy.table = table;
      }
      runs.push_back({name, r, run_episode(env, initial_state(fleet, path), policy, path)});
    }
  }
  return runs;
}

SummaryRow summarize(const std::string& label, const std::vector<ReplicateRun>& runs) {
  SummaryRow row;
  row.point = label;
  std::map<std::string, std::vector<double>> served;
  std::map<int, long> seen;
  for (const ReplicateRun& run : runs) {
    served[run.policy].push_back(static_cast<double>(run.metrics.served()));
    seen[run.replicate] = run.metrics.seen();
  }
  row.replicates = static_cast<int>(seen.size());
  for (const auto& [r, s] : seen) row.seen_mean += static_cast<double>(s);
  if (!seen.empty()) row.seen_mean /= static_cast<double>(seen.size());
  for (const auto& [policy, values] : served) {
    PolicyStats st;
    for (double v : values) st.mean += v;
    st.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - st.mean) * (v - st.mean);
      st.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    row.served[policy] = st;
  }
  if (row.served.count("adp") > 0 && row.served.count("myopic") > 0 && row.seen_mean > 0.0) {
    row.pct_improvement = (row.served["adp"].mean - row.served["myopic"].mean) / row.seen_mean * 100.0;
  }
  return row;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os) {
  os << "point,replicates,seen_mean,myopic_mean,myopic_std,adp_mean,adp_std,pct_improvement\n";
  for (const SummaryRow& r : rows) {
    os << r.point << ',' << r.replicates << ',' << detail::exact(r.seen_mean);
    for (const char* policy : {"myopic", "adp"}) {
      auto it = r.served.find(policy);
      if (it == r.served.end()) {
        os << ",,";
      } else {
        os << ',' << detail::exact(it->second.mean) << ',' << detail::exact(it->second.std);
      }
    }
    os << ',';
    if (r.pct_improvement) os << detail::exact(*r.pct_improvement);
    os << '\n';
  }
}

void cmd_generate(const ScenarioConfig& config) {
  Scenario s = build_scenario(config);
  const fs::path dir(config.output_dir);
  {
    auto out = open_output(dir / "network.txt");
    s.network.write(out);
  }
  {
    auto out = open_output(dir / "model.txt");
    write_model(s.model, out);
  }
  save_pickup_counts(s.pickups, (dir / "pickups.csv").string());
  for (int r = 1; r <= config.replicates; ++r) {
    auto out = open_output(dir / fmt::format("requests_{}.csv", r));
    write_requests_csv(replicate_path(config, s, r), out);
  }
}

TrainingResult cmd_train(const ScenarioConfig& config) {
  Scenario s = build_scenario(config);
  const fs::path dir(config.output_dir);
  const fs::path table_path(config.table_path());
  const fs::path log_path = dir / "training_log.csv";

  TrainingConfig tc = training_config(config);
  ValueTable table(s.hierarchy.levels(), config.bakf);
  bool resuming = false;
  if (config.resume && fs::exists(table_path)) {
    table = load_value_table(table_path.string(), config.bakf);
    if (table.levels() != s.hierarchy.levels()) {
      throw ConfigError("saved value table does not match the aggregation levels");
    }
    tc.first_iteration = last_logged_iteration(log_path) + 1;
    resuming = true;
  }
  TrainingResult result = train(tc, s.environment(), s.model, std::move(table));
  {
    auto out = open_output(table_path);
    result.table.write(out);
  }
  {
    std::ostringstream text;
    write_training_log(result.log, text);
    std::string body = text.str();
    if (resuming && fs::exists(log_path)) {
      body = body.substr(body.find('\n') + 1);  // keep the existing header
      std::ofstream out(log_path, std::ios::app);
      if (!out) throw std::runtime_error(fmt::format("cannot append to '{}'", log_path.string()));
      out << body;
    } else {
      auto out = open_output(log_path);
      out << body;
    }
  }
  return result;
}

namespace {

SummaryRow evaluate_into(const ScenarioConfig& config, const Scenario& scenario, const ValueTable* table,
                         const std::string& label) {
  const fs::path dir(config.output_dir);
  std::vector<ReplicateRun> runs = evaluate_policies(config, scenario, table);
  for (const ReplicateRun& run : runs) {
    auto out = open_output(dir / fmt::format("metrics_{}_{}.csv", run.policy, run.replicate));
    write_metrics_csv(run.metrics, out);
  }
  return summarize(label, runs);
}

}  // namespace

std::vector<SummaryRow> cmd_evaluate(const ScenarioConfig& config) {
  Scenario s = build_scenario(config);
  std::optional<ValueTable> table;
  if (config.wants("adp")) {
    if (!fs::exists(config.table_path())) {
      throw ConfigError(fmt::format("value table '{}' not found; run train first", config.table_path()));
    }
    table = load_value_table(config.table_path(), config.bakf);
    if (table->levels() != s.hierarchy.levels()) {
      throw ConfigError("value table does not match the aggregation levels");
    }
  }
  std::vector<SummaryRow> rows{evaluate_into(config, s, table ? &*table : nullptr, "base")};
  auto out = open_output(fs::path(config.output_dir) / "summary.csv");
  write_summary_csv(rows, out);
  return rows;
}

std::vector<SummaryRow> cmd_sweep(const ScenarioConfig& config) {
  const std::vector<SweepPoint> points = expand_sweep(config);
  std::vector<SummaryRow> rows(points.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        ScenarioConfig c = points[i].config;
        c.output_dir = (fs::path(config.output_dir) / fmt::format("point_{}", i + 1)).string();
        c.table_file.clear();
        c.resume = false;
        std::optional<TrainingResult> trained;
        if (c.wants("adp")) trained = cmd_train(c);
        Scenario s = build_scenario(c);
        rows[i] = evaluate_into(c, s, trained ? &trained->table : nullptr, points[i].label);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                           static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  auto out = open_output(fs::path(config.output_dir) / "summary.csv");
  write_summary_csv(rows, out);
  return rows;
}

}  // namespace ridepool
