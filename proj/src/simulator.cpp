#include "ridepool/simulator.hpp"

#include <ostream>

#include <fmt/format.h>

#include "ridepool/road_network.hpp"
#include "text_util.hpp"

namespace ridepool {

long EpisodeMetrics::seen() const {
  long n = 0;
  for (const auto& e : epochs) n += e.seen;
  return n;
}

long EpisodeMetrics::served() const {
  long n = 0;
  for (const auto& e : epochs) n += e.served;
  return n;
}

long EpisodeMetrics::deadline_violations() const {
  long n = 0;
  for (const auto& e : epochs) n += e.deadline_violations;
  return n;
}

int nearby_vehicles(const SystemState& state, std::size_t vehicle, const TravelTimeOracle& oracle,
                    Seconds wait_max) {
  const Location here = state.vehicles[vehicle].anchor();
  int count = 0;
  for (std::size_t j = 0; j < state.vehicles.size(); ++j) {
    if (j == vehicle) continue;
    if (time_from_position(state.vehicles[j], here, oracle) <= wait_max) ++count;
  }
  return count;
}

std::vector<int> reach_counts(const SystemState& state, const TravelTimeOracle& oracle, Seconds wait_max) {
  std::vector<int> reach(static_cast<std::size_t>(oracle.node_count()), 0);
  for (const Vehicle& v : state.vehicles) {
    for (Location node = 0; node < oracle.node_count(); ++node) {
      if (time_from_position(v, node, oracle) <= wait_max) ++reach[static_cast<std::size_t>(node)];
    }
  }
  return reach;
}

AuxFeatures post_features(const Environment& env, const SystemState& state, const std::vector<int>& reach,
                          std::size_t i, const Vehicle& after) {
  const Location node = after.anchor();
  int nearby = reach[static_cast<std::size_t>(node)];
  if (time_from_position(state.vehicles[i], node, *env.oracle) <= env.limits.wait_max) --nearby;
  return {volume_bucket(state.open.size(), env.mean_rate), nearby_bucket(nearby)};
}

std::vector<AuxFeatures> aux_features(const Environment& env, const SystemState& state) {
  const int volume = volume_bucket(state.open.size(), env.mean_rate);
  std::vector<AuxFeatures> aux(state.vehicles.size());
  for (std::size_t i = 0; i < aux.size(); ++i) {
    aux[i].volume_bucket = volume;
    aux[i].nearby_bucket = nearby_bucket(nearby_vehicles(state, i, *env.oracle, env.limits.wait_max));
  }
  return aux;
}

EpochMetrics step(const Environment& env, SystemState& state, const Policy& policy,
                  std::vector<Request> arrivals, StepTrace* trace) {
  if (env.oracle == nullptr || env.hierarchy == nullptr) throw ContractError("environment is incomplete");
  if (policy.kind == PolicyKind::Adp && policy.table == nullptr) {
    throw ContractError("the ADP policy needs a value table");
  }
  const int t = state.epoch;
  const Seconds delta = env.limits.epoch_seconds;
  const Seconds now = epoch_start(t, delta);
  const TravelTimeOracle& oracle = *env.oracle;

  const bool need_aux = policy.kind == PolicyKind::Adp || trace != nullptr;
  const std::vector<int> reach =
      need_aux ? reach_counts(state, oracle, env.limits.wait_max) : std::vector<int>{};
  const SystemState before = need_aux ? state : SystemState{};

  PostValueFn value_fn;
  if (policy.kind == PolicyKind::Adp && t < env.horizon) {
    value_fn = [&](const Vehicle& after, std::size_t i) {
      Vehicle dry = after;
      advance(dry, now, delta, oracle);
      return policy.table->estimate(
          project_all(dry, t, post_features(env, before, reach, i, dry), *env.hierarchy));
    };
  }
  const std::vector<Location> no_points;
  const auto& points = policy.rebalancing ? env.rebalance_points : no_points;
  DecisionProblem dp = enumerate_candidates(state.vehicles, state.open, now, oracle, env.limits, points,
                                            value_fn ? &value_fn : nullptr);
  AssignmentSolution sol = solve(dp.lp);

  EpochMetrics m;
  m.epoch = t;
  m.seen = static_cast<int>(state.open.size());
  m.served = reward(dp.lp, sol);

  std::vector<std::size_t> next_vehicle(dp.vehicle_members.size(), 0);
  std::vector<std::size_t> next_request(dp.request_members.size(), 0);
  std::vector<int> vehicle_class(state.vehicles.size(), -1);
  for (std::size_t c = 0; c < dp.lp.candidates.size(); ++c) {
    const Candidate& cand = dp.lp.candidates[c];
    const auto a = static_cast<std::size_t>(cand.vehicle_class);
    for (int k = 0; k < sol.flows[c]; ++k) {
      const std::size_t vi = dp.vehicle_members[a].at(next_vehicle[a]++);
      vehicle_class[vi] = cand.vehicle_class;
      const Request* request = nullptr;
      if (cand.kind == ActionKind::Serve) {
        const auto b = static_cast<std::size_t>(cand.request_class);
        request = &state.open[dp.request_members[b].at(next_request[b]++)];
      }
      state.vehicles[vi] = apply_candidate(dp, c, state.vehicles[vi], request, now, oracle, env.limits);
      if (cand.kind == ActionKind::Relocate && state.vehicles[vi].route.relocation_target) ++m.rebalanced;
    }
  }
  for (int cls : vehicle_class) {
    if (cls < 0) throw InternalError("a vehicle received no action");
  }

  int nonempty = 0;
  long groups = 0;
  double used = 0.0;
  for (const Vehicle& v : state.vehicles) {
    if (v.assigned.empty()) {
      ++m.empty_vehicles;
      continue;
    }
    ++nonempty;
    groups += static_cast<long>(v.assigned.size());
    used += static_cast<double>(v.load()) / env.limits.capacity_max;
  }
  if (nonempty > 0) {
    m.avg_groups_nonempty = static_cast<double>(groups) / nonempty;
    m.avg_capacity_used = used / nonempty;
  }

  for (Vehicle& v : state.vehicles) {
    for (const VehicleEvent& e : advance(v, now, delta, oracle)) {
      if (e.kind != StopKind::Dropoff) continue;
      ++m.dropoffs;
      if (e.at > e.request.deadline) ++m.deadline_violations;
    }
  }

  if (trace != nullptr) {
    trace->post_keys.resize(state.vehicles.size());
    for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
      const AuxFeatures aux = post_features(env, before, reach, i, state.vehicles[i]);
      trace->post_keys[i] = project_all(state.vehicles[i], t, aux, *env.hierarchy);
    }
    trace->problem = std::move(dp.lp);
    trace->solution = std::move(sol);
    trace->vehicle_class = std::move(vehicle_class);
  }

  state.epoch = t + 1;
  state.open = std::move(arrivals);
  return m;
}

std::vector<Vehicle> random_fleet(int size, int node_count, std::uint64_t seed) {
  if (size < 1) throw ContractError("fleet size must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Location> node(0, node_count - 1);
  std::vector<Vehicle> fleet(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    fleet[static_cast<std::size_t>(i)].id = i;
    fleet[static_cast<std::size_t>(i)].location = node(rng);
  }
  return fleet;
}

SystemState initial_state(std::vector<Vehicle> fleet, const SamplePath& path) {
  SystemState s;
  s.epoch = 1;
  s.vehicles = std::move(fleet);
  if (path.horizon() >= 1) s.open = path.at(1);
  return s;
}

EpisodeMetrics run_episode(const Environment& env, SystemState state, const Policy& policy,
                           const SamplePath& path) {
  if (path.horizon() < env.horizon) throw ContractError("sample path is shorter than the horizon");
  EpisodeMetrics out;
  out.fleet_size = static_cast<int>(state.vehicles.size());
  for (int t = state.epoch; t <= env.horizon; ++t) {
    std::vector<Request> arrivals = t < env.horizon ? path.at(t + 1) : std::vector<Request>{};
    out.epochs.push_back(step(env, state, policy, std::move(arrivals)));
  }
  return out;
}

void write_metrics_csv(const EpisodeMetrics& metrics, std::ostream& os) {
  os << "epoch,seen,served,empty_vehicles,rebalanced,avg_groups_nonempty,avg_capacity_used\n";
  for (const EpochMetrics& e : metrics.epochs) {
    os << e.epoch << ',' << e.seen << ',' << e.served << ',' << e.empty_vehicles << ',' << e.rebalanced << ','
       << detail::exact(e.avg_groups_nonempty) << ',' << detail::exact(e.avg_capacity_used) << '\n';
  }
}

}  // namespace ridepool
