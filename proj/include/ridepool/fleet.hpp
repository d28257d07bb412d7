#pragma once

#include <map>
#include <optional>
#include <vector>

#include "ridepool/common.hpp"
#include "ridepool/demand.hpp"

namespace ridepool {

class TravelTimeOracle;

enum class StopKind { Pickup, Dropoff };

struct Stop {
  Location location = 0;
  StopKind kind = StopKind::Dropoff;
  RequestId request = 0;
  Seconds projected_arrival = 0;

  friend bool operator==(const Stop&, const Stop&) = default;
};

/// Ordered stops. A pending pickup is always the first stop. A plan without
/// stops may carry a relocation target instead.
struct RoutePlan {
  std::vector<Stop> stops;
  std::optional<Location> relocation_target;

  bool empty() const { return stops.empty() && !relocation_target; }
  Seconds completion() const { return stops.empty() ? 0 : stops.back().projected_arrival; }

  friend bool operator==(const RoutePlan&, const RoutePlan&) = default;
};

/// A vehicle sits on node `location`, or, when `heading` is set, `offset`
/// seconds along the arc location -> heading. Vehicles never turn around
/// mid-arc.
struct Vehicle {
  VehicleId id = 0;
  Location location = 0;
  std::optional<Location> heading;
  Seconds offset = 0;
  std::vector<Request> assigned;
  RoutePlan route;

  int load() const;
  bool idle() const { return assigned.empty(); }
  /// The node the vehicle is at or is about to reach.
  Location anchor() const { return heading ? *heading : location; }

  friend bool operator==(const Vehicle&, const Vehicle&) = default;
};

/// Travel time from the vehicle's exact position (including a partially
/// driven arc) to `target`.
Seconds time_from_position(const Vehicle& v, Location target, const TravelTimeOracle& oracle);

struct FeasibilityVerdict {
  bool feasible = false;
  std::optional<RoutePlan> best_order;
  std::map<RequestId, Seconds> projected_dropoffs;
};

/// Can `request` join the vehicle at time `now`? Requires spare capacity and
/// group slots, every assigned request already on board, pickup within
/// wait_max of the current position, and some drop-off order (after the
/// immediate pickup) that meets every deadline. The returned order minimizes
/// the last drop-off time, ties going to the lexicographically smallest
/// request-id sequence.
FeasibilityVerdict check_insertion(const Vehicle& vehicle, const Request& request, Seconds now,
                                   const TravelTimeOracle& oracle, const Limits& limits);

/// Commits a feasible insertion: the request joins `assigned` and the plan
/// replaces the current route (cancelling any relocation).
void apply_insertion(Vehicle& vehicle, const Request& request, const RoutePlan& plan);

struct VehicleEvent {
  Seconds at = 0;  // absolute
  StopKind kind = StopKind::Dropoff;
  Request request;
  Location location = 0;

  friend bool operator==(const VehicleEvent&, const VehicleEvent&) = default;
};

/// Drives the vehicle along its plan for `seconds` starting at absolute time
/// `now`, emitting pickups and drop-offs when they happen. A vehicle with no
/// plan stays where it is.
std::vector<VehicleEvent> advance(Vehicle& vehicle, Seconds now, Seconds seconds,
                                  const TravelTimeOracle& oracle);

/// Sends an empty vehicle towards `target`. Throws ContractError when the
/// vehicle has assigned requests.
void relocate(Vehicle& vehicle, Location target);

}  // namespace ridepool
