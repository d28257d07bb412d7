#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ridepool/common.hpp"
#include "ridepool/demand.hpp"
#include "ridepool/fleet.hpp"

namespace ridepool {

class TravelTimeOracle;

enum class ActionKind { Serve, Relocate, Null };

/// One column of the epoch assignment LP.
struct Candidate {
  int vehicle_class = 0;
  ActionKind kind = ActionKind::Null;
  int request_class = -1;  // Serve only
  int point = -1;          // Relocate only: index into the rebalance points
  double coefficient = 0.0;
};

/// max sum_c coef_c x_c
///   s.t. sum of x over candidates of vehicle class a  = vehicle_counts[a]
///        sum of Serve x over request class b          <= request_counts[b]
///        x >= 0
struct AssignmentProblem {
  std::vector<int> vehicle_counts;
  std::vector<int> request_counts;
  std::vector<Candidate> candidates;

  /// Throws ContractError unless every class count is >= 1, every vehicle
  /// class has exactly one Null candidate, and no (vehicle, request) pair
  /// repeats.
  void validate() const;
};

struct AssignmentSolution {
  std::vector<int> flows;  // per candidate
  double objective = 0.0;
  std::vector<double> vehicle_duals;  // free; marginal value of one more vehicle
  std::vector<double> request_duals;  // >= 0
};

/// Exact integral optimum with optimal duals.
///
/// Null and Relocate options are private to a vehicle class, so each class
/// first settles on its best such option (Null wins ties). What remains is a
/// transportation problem over the strictly profitable Serve arcs, solved by
/// successive shortest paths with Dijkstra on reduced costs. The duals are
/// read off the final node potentials, which satisfy complementary slackness
/// with the returned flows.
AssignmentSolution solve(const AssignmentProblem& problem);

/// Number of requests served (total Serve flow).
int reward(const AssignmentProblem& problem, const AssignmentSolution& solution);

void write_problem(const AssignmentProblem& problem, std::ostream& os);
AssignmentProblem read_problem(std::istream& is);
void write_solution(const AssignmentSolution& solution, std::ostream& os);

/// Value of the vehicle state that results from an action. Receives the
/// vehicle with the action applied (not yet moved) and the index of the
/// vehicle it was derived from.
using PostValueFn = std::function<double(const Vehicle& after_action, std::size_t vehicle_index)>;

/// The epoch decision problem together with the bookkeeping needed to apply
/// a solution back to individual vehicles and requests.
struct DecisionProblem {
  AssignmentProblem lp;
  std::vector<std::vector<std::size_t>> vehicle_members;  // per class, indices into vehicles
  std::vector<std::vector<std::size_t>> request_members;  // per class, indices into requests
  std::vector<std::optional<RoutePlan>> plans;            // per candidate, Serve only
  std::vector<Location> rebalance_points;
};

/// Builds F_t, Q_t and the Null actions for the current epoch. Serve arcs come
/// from check_insertion; Relocate arcs are offered to empty vehicles for every
/// rebalance point (pass an empty list to disable rebalancing). Coefficients
/// are 1 + value (Serve) and value (Relocate, Null); without a value function
/// the value is 0, which is the myopic objective.
DecisionProblem enumerate_candidates(std::span<const Vehicle> vehicles,
                                     std::span<const Request> requests, Seconds now,
                                     const TravelTimeOracle& oracle, const Limits& limits,
                                     std::span<const Location> rebalance_points,
                                     const PostValueFn* value_fn);

/// Vehicle state after taking candidate `c` (before any motion). `vehicle`
/// must belong to the candidate's class; for Serve, `request` must belong to
/// its request class.
Vehicle apply_candidate(const DecisionProblem& problem, std::size_t c, const Vehicle& vehicle,
                        const Request* request, Seconds now, const TravelTimeOracle& oracle,
                        const Limits& limits);

}  // namespace ridepool
