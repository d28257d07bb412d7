#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "ridepool/demand.hpp"
#include "ridepool/matching.hpp"
#include "ridepool/simulator.hpp"
#include "ridepool/vfa.hpp"

namespace ridepool {

struct TrainingConfig {
  int iterations = 200;
  int fleet_size = 100;
  bool rebalancing = true;
  std::uint64_t seed = 1;
  int first_iteration = 1;  // numbering continues here when resuming
};

struct IterationLog {
  int iteration = 0;
  long requests_seen = 0;
  long requests_served = 0;
  double mean_dual = 0.0;
  std::size_t table_entries = 0;

  friend bool operator==(const IterationLog&, const IterationLog&) = default;
};

/// A vehicle's post-decision keys at epoch t-1 and its class at epoch t.
struct TransitionRecord {
  VehicleId vehicle = 0;
  std::vector<PostDecisionKey> previous_keys;
  int realized_class = 0;
};

/// Vehicle-class duals of the solved epoch problem, keyed by class index.
std::map<int, double> extract_marginals(const AssignmentProblem& problem,
                                        const AssignmentSolution& solution);

/// Smooths each vehicle's realized-class dual into its previous post-decision
/// entries. Returns the observations used, in record order.
std::vector<double> propagate(const std::vector<TransitionRecord>& records,
                              const std::map<int, double>& marginals, ValueTable& table);

/// Seed of iteration `n` drawn from the master seed (independent streams per
/// purpose).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

struct TrainingResult {
  ValueTable table;
  std::vector<IterationLog> log;
};

/// Forward-pass training. Each iteration draws a fresh fleet placement and
/// sample path, runs the ADP policy with the current table and updates the
/// previous epoch's post-decision entries with this epoch's duals.
TrainingResult train(const TrainingConfig& config, const Environment& env, const ArrivalModel& model,
                     ValueTable table);

/// Same loop over recorded days instead of sampled ones: iteration n replays
/// days[(n - 1) % days.size()] with deadlines recomputed for the environment.
TrainingResult train(const TrainingConfig& config, const Environment& env, std::span<const SamplePath> days,
                     ValueTable table);

/// `iteration,requests_seen,requests_served,mean_dual,table_entries`
void write_training_log(const std::vector<IterationLog>& log, std::ostream& os);

}  // namespace ridepool
