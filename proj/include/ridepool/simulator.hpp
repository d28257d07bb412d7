#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ridepool/common.hpp"
#include "ridepool/demand.hpp"
#include "ridepool/fleet.hpp"
#include "ridepool/matching.hpp"
#include "ridepool/vfa.hpp"

namespace ridepool {

class TravelTimeOracle;
class AggregationHierarchy;

/// Read-only scenario context shared by every epoch of an episode.
struct Environment {
  const TravelTimeOracle* oracle = nullptr;
  const AggregationHierarchy* hierarchy = nullptr;
  Limits limits;
  std::vector<Location> rebalance_points;
  double mean_rate = 0.0;  // for the request-volume feature
  int horizon = 1;
};

/// Vehicles plus the requests that arrived for the current epoch. Requests
/// nobody takes leave the system at the end of the epoch.
struct SystemState {
  int epoch = 1;
  std::vector<Vehicle> vehicles;
  std::vector<Request> open;
};

enum class PolicyKind { Myopic, Adp };

struct Policy {
  PolicyKind kind = PolicyKind::Myopic;
  const ValueTable* table = nullptr;  // required for Adp
  bool rebalancing = true;
};

struct EpochMetrics {
  int epoch = 0;
  int seen = 0;
  int served = 0;
  int empty_vehicles = 0;       // after decisions
  int rebalanced = 0;           // relocations issued this epoch
  double avg_groups_nonempty = 0.0;
  double avg_capacity_used = 0.0;  // mean load / capacity_max over non-empty vehicles
  int deadline_violations = 0;
  int dropoffs = 0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct EpisodeMetrics {
  std::vector<EpochMetrics> epochs;
  int fleet_size = 0;

  long seen() const;
  long served() const;
  long deadline_violations() const;
};

/// What training needs from one epoch: the solved problem, each vehicle's
/// class and the keys of its post-decision state.
struct StepTrace {
  AssignmentProblem problem;
  AssignmentSolution solution;
  std::vector<int> vehicle_class;                       // per vehicle
  std::vector<std::vector<PostDecisionKey>> post_keys;  // per vehicle, all levels
};

/// Other vehicles that can reach this vehicle's node within wait_max.
int nearby_vehicles(const SystemState& state, std::size_t vehicle, const TravelTimeOracle& oracle,
                    Seconds wait_max);

/// Per node: how many vehicles can reach it within wait_max from where they
/// are now.
std::vector<int> reach_counts(const SystemState& state, const TravelTimeOracle& oracle, Seconds wait_max);

/// Bucketed features of every vehicle for the current state.
std::vector<AuxFeatures> aux_features(const Environment& env, const SystemState& state);

/// Features of vehicle `i` once it sits at `after`: crowding is counted
/// around the post-decision node using everyone else's current position.
AuxFeatures post_features(const Environment& env, const SystemState& state, const std::vector<int>& reach,
                          std::size_t i, const Vehicle& after);

/// Decides, applies and simulates one epoch, then installs `arrivals` as the
/// next epoch's open requests.
EpochMetrics step(const Environment& env, SystemState& state, const Policy& policy,
                  std::vector<Request> arrivals, StepTrace* trace = nullptr);

/// Fleet with every vehicle idle at a node drawn uniformly.
std::vector<Vehicle> random_fleet(int size, int node_count, std::uint64_t seed);

SystemState initial_state(std::vector<Vehicle> fleet, const SamplePath& path);

EpisodeMetrics run_episode(const Environment& env, SystemState state, const Policy& policy,
                           const SamplePath& path);

/// `epoch,seen,served,empty_vehicles,rebalanced,avg_groups_nonempty,avg_capacity_used`
void write_metrics_csv(const EpisodeMetrics& metrics, std::ostream& os);

}  // namespace ridepool
