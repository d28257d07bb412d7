#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ridepool/common.hpp"
#include "ridepool/demand.hpp"
#include "ridepool/road_network.hpp"
#include "ridepool/simulator.hpp"
#include "ridepool/vfa.hpp"

namespace ridepool {

/// Bad configuration: unknown key, malformed value, missing input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Knobs of the synthetic city: a few hot communities emit most trips,
/// destinations spread over the whole grid.
struct SyntheticDemand {
  int communities = 9;
  int points_per_community = 5;
  int hot_communities = 2;
  double hot_weight = 8.0;      // origin weight of a hot community relative to a cold one
  double peak_rate = 30.0;      // requests per epoch at the top of the curve
  double curve_width = 0.5;     // standard deviation of the arrival curve, as a fraction of the horizon
  double size_mean = 1.5;       // passenger sizes: normal truncated to 1..4
  double size_sd = 1.0;
  double count_std = 1.0;
};

struct ScenarioConfig {
  std::string network_file;  // empty: generated grid
  int grid_rows = 15;
  int grid_cols = 15;
  WeightRange weights{20, 40};
  bool directed = false;
  double edge_removal = 0.0;

  std::string model_file;  // empty: synthetic demand
  SyntheticDemand synthetic;
  int horizon = 60;
  int history_days = 20;  // sampled days whose pickups choose the rebalance points

  Limits limits;
  int fleet_size = 100;
  bool rebalancing = true;
  std::vector<int> zone_counts;  // empty: node count, 9, 1
  int rebalance_level = 1;

  int iterations = 200;
  BakfParams bakf;

  int replicates = 5;
  std::uint64_t seed = 1;
  std::vector<std::string> policies{"myopic", "adp"};
  std::string output_dir = "out";
  std::string table_file;  // empty: <output_dir>/value_table.txt
  bool resume = false;

  /// Axis name -> values, applied as overrides in cartesian order.
  std::vector<std::pair<std::string, std::vector<std::string>>> sweep;

  std::string table_path() const;
  bool wants(const std::string& policy) const;
};

/// Applies one `key=value` setting. Throws ConfigError.
void apply_setting(ScenarioConfig& config, const std::string& key, const std::string& value);

/// Reads `key = value` lines (`#` comments). `sweep.<key> = a,b,c` adds an axis.
ScenarioConfig read_config(std::istream& is);
ScenarioConfig load_config(const std::string& path);

/// Every setting with its current value, one per line, in a stable order.
void write_config(const ScenarioConfig& config, std::ostream& os);

/// Network, travel times, hierarchy, demand and rebalance points of one
/// configuration.
struct Scenario {
  RoadNetwork network;
  TravelTimeOracle oracle;
  AggregationHierarchy hierarchy;
  ArrivalModel model;
  std::vector<Location> rebalance_points;
  std::map<Location, std::int64_t> pickups;
  Limits limits;
  int horizon = 1;

  Environment environment() const;
  DeadlineRule deadline_rule() const;
};

RoadNetwork build_network(const ScenarioConfig& config);

/// Synthetic arrival model on a grid network. Deterministic in `seed`.
ArrivalModel synthetic_model(const RoadNetwork& network, const SyntheticDemand& demand, int horizon,
                             std::uint64_t seed);

/// Passenger-size probabilities over 1..4 from a normal curve cut at the
/// half-integers and renormalized.
std::array<double, 4> truncated_normal_sizes(double mean, double sd);

Scenario build_scenario(const ScenarioConfig& config);

}  // namespace ridepool
