#include "ridepool/fleet.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "ridepool/road_network.hpp"

namespace ridepool {

int Vehicle::load() const {
  int total = 0;
  for (const Request& r : assigned) total += r.passengers;
  return total;
}

Seconds time_from_position(const Vehicle& v, Location target, const TravelTimeOracle& oracle) {
  if (!v.heading) return oracle.travel_time(v.location, target);
  Seconds rest = oracle.arc_seconds(v.location, *v.heading) - v.offset;
  return rest + oracle.travel_time(*v.heading, target);
}

FeasibilityVerdict check_insertion(const Vehicle& vehicle, const Request& request, Seconds now,
                                   const TravelTimeOracle& oracle, const Limits& limits) {
  FeasibilityVerdict verdict;
  if (static_cast<int>(vehicle.assigned.size()) + 1 > limits.groups_max) return verdict;
  if (vehicle.load() + request.passengers > limits.capacity_max) return verdict;
  for (const Request& r : vehicle.assigned) {
    if (!r.picked_up) return verdict;
  }
  const Seconds to_pickup = time_from_position(vehicle, request.origin, oracle);
  if (to_pickup > limits.wait_max) return verdict;
  const Seconds pickup_at = now + to_pickup;

  std::vector<const Request*> riders;
  riders.reserve(vehicle.assigned.size() + 1);
  for (const Request& r : vehicle.assigned) riders.push_back(&r);
  riders.push_back(&request);
  std::sort(riders.begin(), riders.end(),
            [](const Request* l, const Request* r) { return l->id < r->id; });

  std::vector<std::size_t> order(riders.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> best;
  Seconds best_completion = 0;
  std::vector<Seconds> arrivals(riders.size());
  std::vector<Seconds> best_arrivals;
  do {
    Seconds clock = pickup_at;
    Location at = request.origin;
    bool ok = true;
    for (std::size_t k = 0; k < order.size() && ok; ++k) {
      const Request& r = *riders[order[k]];
      clock += oracle.travel_time(at, r.destination);
      at = r.destination;
      arrivals[k] = clock;
      ok = clock <= r.deadline;
    }
    if (ok && (best.empty() || clock < best_completion)) {
      best = order;
      best_completion = clock;
      best_arrivals = arrivals;
    }
  } while (std::next_permutation(order.begin(), order.end()));

  if (best.empty()) return verdict;
  RoutePlan plan;
  plan.stops.push_back({request.origin, StopKind::Pickup, request.id, pickup_at});
  for (std::size_t k = 0; k < best.size(); ++k) {
    const Request& r = *riders[best[k]];
    plan.stops.push_back({r.destination, StopKind::Dropoff, r.id, best_arrivals[k]});
    verdict.projected_dropoffs[r.id] = best_arrivals[k];
  }
  verdict.feasible = true;
  verdict.best_order = std::move(plan);
  return verdict;
}

void apply_insertion(Vehicle& vehicle, const Request& request, const RoutePlan& plan) {
  vehicle.assigned.push_back(request);
  // Keep the assigned list in drop-off order.
  std::vector<Request> ordered;
  ordered.reserve(vehicle.assigned.size());
  for (const Stop& s : plan.stops) {
    if (s.kind != StopKind::Dropoff) continue;
    auto it = std::find_if(vehicle.assigned.begin(), vehicle.assigned.end(),
                           [&](const Request& r) { return r.id == s.request; });
    if (it == vehicle.assigned.end()) {
      throw InternalError(fmt::format("plan drops request {} that is not assigned", s.request));
    }
    ordered.push_back(*it);
  }
  if (ordered.size() != vehicle.assigned.size()) {
    throw InternalError("plan does not drop every assigned request");
  }
  vehicle.assigned = std::move(ordered);
  vehicle.route = plan;
}

std::vector<VehicleEvent> advance(Vehicle& vehicle, Seconds now, Seconds seconds,
                                  const TravelTimeOracle& oracle) {
  std::vector<VehicleEvent> events;
  Seconds clock = now;
  Seconds remaining = seconds;
  while (true) {
    if (vehicle.heading) {
      Seconds need = oracle.arc_seconds(vehicle.location, *vehicle.heading) - vehicle.offset;
      if (need > remaining) {
        vehicle.offset += remaining;
        return events;
      }
      remaining -= need;
      clock += need;
      vehicle.location = *vehicle.heading;
      vehicle.heading.reset();
      vehicle.offset = 0;
    }

    auto& stops = vehicle.route.stops;
    while (!stops.empty() && stops.front().location == vehicle.location) {
      Stop stop = stops.front();
      stops.erase(stops.begin());
      auto it = std::find_if(vehicle.assigned.begin(), vehicle.assigned.end(),
                             [&](const Request& r) { return r.id == stop.request; });
      if (it == vehicle.assigned.end()) {
        throw InternalError(fmt::format("vehicle {} reached a stop for unassigned request {}",
                                        vehicle.id, stop.request));
      }
      if (stop.kind == StopKind::Pickup) {
        it->picked_up = true;
        events.push_back({clock, StopKind::Pickup, *it, vehicle.location});
      } else {
        if (!it->picked_up) {
          throw InternalError(fmt::format("request {} dropped before pickup", it->id));
        }
        events.push_back({clock, StopKind::Dropoff, *it, vehicle.location});
        vehicle.assigned.erase(it);
      }
    }

    std::optional<Location> target;
    if (!stops.empty()) {
      target = stops.front().location;
    } else if (vehicle.route.relocation_target) {
      if (*vehicle.route.relocation_target == vehicle.location) {
        vehicle.route.relocation_target.reset();
      } else {
        target = vehicle.route.relocation_target;
      }
    }
    if (!target || remaining == 0) return events;
    Location hop = oracle.next_hop(vehicle.location, *target);
    if (hop < 0 || hop == vehicle.location) {
      throw InternalError(fmt::format("vehicle {} cannot route {} -> {}", vehicle.id,
                                      vehicle.location, *target));
    }
    vehicle.heading = hop;
    vehicle.offset = 0;
  }
}

void relocate(Vehicle& vehicle, Location target) {
  if (!vehicle.assigned.empty()) {
    throw ContractError(fmt::format("vehicle {} has assigned requests and cannot relocate", vehicle.id));
  }
  vehicle.route.stops.clear();
  if (!vehicle.heading && target == vehicle.location) {
    vehicle.route.relocation_target.reset();
  } else {
    vehicle.route.relocation_target = target;
  }
}

}  // namespace ridepool
