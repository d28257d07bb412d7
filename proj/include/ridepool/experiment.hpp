#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ridepool/scenario.hpp"
#include "ridepool/simulator.hpp"
#include "ridepool/trainer.hpp"

namespace ridepool {

struct PolicyStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over replicates (0 for one replicate)
};

struct SummaryRow {
  std::string point;
  int replicates = 0;
  double seen_mean = 0.0;
  std::map<std::string, PolicyStats> served;  // by policy name
  std::optional<double> pct_improvement;      // (adp - myopic) / seen * 100, on the means
};

struct ReplicateRun {
  std::string policy;
  int replicate = 0;  // 1-based
  EpisodeMetrics metrics;
};

/// One sweep point: a label such as `wait_delay=60;groups_max=2` and the
/// resolved configuration.
struct SweepPoint {
  std::string label;
  ScenarioConfig config;
};

/// Cartesian product of the sweep axes, first axis slowest. Without axes the
/// base configuration is the single point `base`.
std::vector<SweepPoint> expand_sweep(const ScenarioConfig& config);

/// Evaluation inputs of replicate r: its sample path and initial fleet. All
/// policies and sweep points share them.
SamplePath replicate_path(const ScenarioConfig& config, const Scenario& scenario, int replicate);
std::vector<Vehicle> replicate_fleet(const ScenarioConfig& config, const Scenario& scenario, int replicate);

std::vector<ReplicateRun> evaluate_policies(const ScenarioConfig& config, const Scenario& scenario,
                                            const ValueTable* table);

SummaryRow summarize(const std::string& label, const std::vector<ReplicateRun>& runs);

/// `point,replicates,seen_mean,myopic_mean,myopic_std,adp_mean,adp_std,pct_improvement`
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os);

/// Writes network.txt, model.txt, pickups.csv and requests_<r>.csv.
void cmd_generate(const ScenarioConfig& config);

/// Trains (or resumes) and writes the value table plus training_log.csv.
TrainingResult cmd_train(const ScenarioConfig& config);

/// Writes metrics_<policy>_<r>.csv per replicate and summary.csv.
std::vector<SummaryRow> cmd_evaluate(const ScenarioConfig& config);

/// Trains and evaluates every sweep point under <output_dir>/point_<i>/ and
/// writes the combined summary.csv.
std::vector<SummaryRow> cmd_sweep(const ScenarioConfig& config);

}  // namespace ridepool
