#include "ridepool/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ridepool/road_network.hpp"
#include "text_util.hpp"

namespace ridepool {

void AssignmentProblem::validate() const {
  for (int c : vehicle_counts) {
    if (c < 1) throw ContractError("vehicle class counts must be >= 1");
  }
  for (int c : request_counts) {
    if (c < 1) throw ContractError("request class counts must be >= 1");
  }
  std::vector<int> nulls(vehicle_counts.size(), 0);
  std::set<std::pair<int, int>> pairs;
  for (const Candidate& c : candidates) {
    if (c.vehicle_class < 0 || c.vehicle_class >= static_cast<int>(vehicle_counts.size())) {
      throw ContractError("candidate references an unknown vehicle class");
    }
    if (!std::isfinite(c.coefficient)) throw ContractError("candidate coefficient is not finite");
    switch (c.kind) {
      case ActionKind::Null:
        ++nulls[static_cast<std::size_t>(c.vehicle_class)];
        break;
      case ActionKind::Serve:
        if (c.request_class < 0 || c.request_class >= static_cast<int>(request_counts.size())) {
          throw ContractError("Serve candidate references an unknown request class");
        }
        if (!pairs.insert({c.vehicle_class, c.request_class}).second) {
          throw ContractError("duplicate Serve candidate for a vehicle/request class pair");
        }
        break;
      case ActionKind::Relocate:
        break;
    }
  }
  for (int n : nulls) {
    if (n != 1) throw ContractError("every vehicle class needs exactly one Null candidate");
  }
}

namespace {

constexpr double kEps = 1e-12;

struct FlowEdge {
  int to;
  std::int64_t cap;
  double cost;
  int rev;
};

class FlowGraph {
 public:
  explicit FlowGraph(int n) : adj_(static_cast<std::size_t>(n)) {}

  int add(int from, int to, std::int64_t cap, double cost) {
    auto& f = adj_[static_cast<std::size_t>(from)];
    auto& t = adj_[static_cast<std::size_t>(to)];
    f.push_back({to, cap, cost, static_cast<int>(t.size())});
    t.push_back({from, 0, -cost, static_cast<int>(f.size()) - 1});
    return static_cast<int>(f.size()) - 1;
  }

  int size() const { return static_cast<int>(adj_.size()); }
  std::vector<FlowEdge>& out(int v) { return adj_[static_cast<std::size_t>(v)]; }
  const FlowEdge& edge(int v, int i) const {
    return adj_[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)];
  }

 private:
  std::vector<std::vector<FlowEdge>> adj_;
};

}  // namespace

AssignmentSolution solve(const AssignmentProblem& problem) {
  problem.validate();
  const auto n_vehicle = problem.vehicle_counts.size();
  const auto n_request = problem.request_counts.size();
  const auto& cands = problem.candidates;

  // Best private option per vehicle class; Null first so it wins ties.
  std::vector<int> base(n_vehicle, -1);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].kind == ActionKind::Null) base[static_cast<std::size_t>(cands[i].vehicle_class)] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].kind != ActionKind::Relocate) continue;
    auto a = static_cast<std::size_t>(cands[i].vehicle_class);
    if (cands[i].coefficient > cands[static_cast<std::size_t>(base[a])].coefficient + kEps) {
      base[a] = static_cast<int>(i);
    }
  }
  std::vector<double> base_value(n_vehicle);
  for (std::size_t a = 0; a < n_vehicle; ++a) base_value[a] = cands[static_cast<std::size_t>(base[a])].coefficient;

  // Profitable Serve arcs define the reduced transportation problem.
  std::vector<int> vehicle_node(n_vehicle, -1);
  std::vector<int> request_node(n_request, -1);
  struct ServeArc {
    std::size_t candidate;
    double gain;
  };
  std::vector<ServeArc> serve;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (cands[i].kind != ActionKind::Serve) continue;
    double gain = cands[i].coefficient - base_value[static_cast<std::size_t>(cands[i].vehicle_class)];
    if (gain > kEps) serve.push_back({i, gain});
  }
  int next = 1;  // node 0 is the super source
  for (const ServeArc& s : serve) {
    auto a = static_cast<std::size_t>(cands[s.candidate].vehicle_class);
    if (vehicle_node[a] < 0) vehicle_node[a] = next++;
  }
  for (const ServeArc& s : serve) {
    auto b = static_cast<std::size_t>(cands[s.candidate].request_class);
    if (request_node[b] < 0) request_node[b] = next++;
  }
  const int source = 0;
  const int sink = next++;
  FlowGraph graph(next);
  constexpr std::int64_t kInfCap = std::numeric_limits<std::int64_t>::max() / 4;

  std::int64_t required = 0;
  for (std::size_t a = 0; a < n_vehicle; ++a) {
    if (vehicle_node[a] < 0) continue;
    graph.add(source, vehicle_node[a], problem.vehicle_counts[a], 0.0);
    graph.add(vehicle_node[a], sink, kInfCap, 0.0);
    required += problem.vehicle_counts[a];
  }
  std::vector<std::pair<int, int>> serve_edge(serve.size());
  for (std::size_t k = 0; k < serve.size(); ++k) {
    const Candidate& c = cands[serve[k].candidate];
    int from = vehicle_node[static_cast<std::size_t>(c.vehicle_class)];
    int to = request_node[static_cast<std::size_t>(c.request_class)];
    serve_edge[k] = {from, graph.add(from, to, kInfCap, -serve[k].gain)};
  }
  for (std::size_t b = 0; b < n_request; ++b) {
    if (request_node[b] >= 0) graph.add(request_node[b], sink, problem.request_counts[b], 0.0);
  }

  // Feasible starting potentials: the graph is a DAG s -> a -> b -> t.
  std::vector<double> pot(static_cast<std::size_t>(graph.size()), 0.0);
  for (std::size_t k = 0; k < serve.size(); ++k) {
    const Candidate& c = cands[serve[k].candidate];
    auto b = static_cast<std::size_t>(request_node[static_cast<std::size_t>(c.request_class)]);
    pot[b] = std::min(pot[b], -serve[k].gain);
  }
  for (std::size_t b = 0; b < n_request; ++b) {
    if (request_node[b] >= 0) {
      pot[static_cast<std::size_t>(sink)] =
          std::min(pot[static_cast<std::size_t>(sink)], pot[static_cast<std::size_t>(request_node[b])]);
    }
  }

  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(graph.size()));
  std::vector<std::pair<int, int>> parent(static_cast<std::size_t>(graph.size()));
  std::int64_t flow = 0;
  while (flow < required) {
    std::fill(dist.begin(), dist.end(), kInf);
    dist[static_cast<std::size_t>(source)] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
      auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[static_cast<std::size_t>(u)]) continue;
      auto& edges = graph.out(u);
      for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
        const FlowEdge& e = edges[static_cast<std::size_t>(i)];
        if (e.cap <= 0) continue;
        double reduced = e.cost + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(e.to)];
        double nd = d + std::max(0.0, reduced);
        if (nd < dist[static_cast<std::size_t>(e.to)] - kEps) {
          dist[static_cast<std::size_t>(e.to)] = nd;
          parent[static_cast<std::size_t>(e.to)] = {u, i};
          heap.emplace(nd, e.to);
        }
      }
    }
    const double to_sink = dist[static_cast<std::size_t>(sink)];
    if (!std::isfinite(to_sink)) throw InternalError("assignment flow network has no augmenting path");
    for (std::size_t v = 0; v < pot.size(); ++v) pot[v] += std::min(dist[v], to_sink);

    std::int64_t push = required - flow;
    for (int v = sink; v != source;) {
      auto [u, i] = parent[static_cast<std::size_t>(v)];
      push = std::min(push, graph.edge(u, i).cap);
      v = u;
    }
    for (int v = sink; v != source;) {
      auto [u, i] = parent[static_cast<std::size_t>(v)];
      FlowEdge& e = graph.out(u)[static_cast<std::size_t>(i)];
      e.cap -= push;
      graph.out(e.to)[static_cast<std::size_t>(e.rev)].cap += push;
      v = u;
    }
    flow += push;
  }

  AssignmentSolution sol;
  sol.flows.assign(cands.size(), 0);
  sol.vehicle_duals = base_value;
  sol.request_duals.assign(n_request, 0.0);
  std::vector<int> served_by_class(n_vehicle, 0);
  for (std::size_t k = 0; k < serve.size(); ++k) {
    auto [from, idx] = serve_edge[k];
    const FlowEdge& e = graph.edge(from, idx);
    const FlowEdge& back = graph.edge(e.to, e.rev);
    auto x = static_cast<int>(back.cap);
    sol.flows[serve[k].candidate] = x;
    served_by_class[static_cast<std::size_t>(cands[serve[k].candidate].vehicle_class)] += x;
  }
  const double pot_sink = pot[static_cast<std::size_t>(sink)];
  for (std::size_t a = 0; a < n_vehicle; ++a) {
    sol.flows[static_cast<std::size_t>(base[a])] = problem.vehicle_counts[a] - served_by_class[a];
    if (vehicle_node[a] >= 0) {
      sol.vehicle_duals[a] += std::max(0.0, pot[static_cast<std::size_t>(vehicle_node[a])] - pot_sink);
    }
  }
  for (std::size_t b = 0; b < n_request; ++b) {
    if (request_node[b] >= 0) {
      sol.request_duals[b] = std::max(0.0, pot_sink - pot[static_cast<std::size_t>(request_node[b])]);
    }
  }
  sol.objective = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) sol.objective += cands[i].coefficient * sol.flows[i];
  return sol;
}

int reward(const AssignmentProblem& problem, const AssignmentSolution& solution) {
  int total = 0;
  for (std::size_t i = 0; i < problem.candidates.size(); ++i) {
    if (problem.candidates[i].kind == ActionKind::Serve) total += solution.flows[i];
  }
  return total;
}

namespace {

const char* kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::Serve:
      return "serve";
    case ActionKind::Relocate:
      return "relocate";
    case ActionKind::Null:
      return "null";
  }
  return "?";
}

}  // namespace

void write_problem(const AssignmentProblem& problem, std::ostream& os) {
  os << "problem vehicles=" << problem.vehicle_counts.size()
     << " requests=" << problem.request_counts.size()
     << " candidates=" << problem.candidates.size() << '\n';
  for (std::size_t a = 0; a < problem.vehicle_counts.size(); ++a) {
    os << "vehicle " << a << ' ' << problem.vehicle_counts[a] << '\n';
  }
  for (std::size_t b = 0; b < problem.request_counts.size(); ++b) {
    os << "request " << b << ' ' << problem.request_counts[b] << '\n';
  }
  for (std::size_t i = 0; i < problem.candidates.size(); ++i) {
    const Candidate& c = problem.candidates[i];
    int target = c.kind == ActionKind::Serve ? c.request_class : c.kind == ActionKind::Relocate ? c.point : -1;
    os << "cand " << i << ' ' << c.vehicle_class << ' ' << kind_name(c.kind) << ' ' << target << ' '
       << detail::exact(c.coefficient) << '\n';
  }
}

AssignmentProblem read_problem(std::istream& is) {
  AssignmentProblem p;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::istringstream in{std::string(view)};
    std::string tag;
    in >> tag;
    if (tag == "problem") continue;
    std::vector<std::string> f;
    for (std::string s; in >> s;) f.push_back(s);
    if (tag == "vehicle" && f.size() == 2) {
      p.vehicle_counts.push_back(static_cast<int>(detail::parse_int(f[1], line_no)));
    } else if (tag == "request" && f.size() == 2) {
      p.request_counts.push_back(static_cast<int>(detail::parse_int(f[1], line_no)));
    } else if (tag == "cand" && f.size() == 5) {
      Candidate c;
      c.vehicle_class = static_cast<int>(detail::parse_int(f[1], line_no));
      auto target = static_cast<int>(detail::parse_int(f[3], line_no));
      if (f[2] == "serve") {
        c.kind = ActionKind::Serve;
        c.request_class = target;
      } else if (f[2] == "relocate") {
        c.kind = ActionKind::Relocate;
        c.point = target;
      } else if (f[2] == "null") {
        c.kind = ActionKind::Null;
      } else {
        throw ParseError(fmt::format("line {}: unknown action '{}'", line_no, f[2]));
      }
      c.coefficient = detail::parse_double(f[4], line_no);
      p.candidates.push_back(c);
    } else {
      throw ParseError(fmt::format("line {}: cannot parse '{}'", line_no, view));
    }
  }
  p.validate();
  return p;
}

void write_solution(const AssignmentSolution& solution, std::ostream& os) {
  os << "solution objective=" << detail::exact(solution.objective) << '\n';
  for (std::size_t i = 0; i < solution.flows.size(); ++i) {
    if (solution.flows[i] != 0) os << "flow " << i << ' ' << solution.flows[i] << '\n';
  }
  for (std::size_t a = 0; a < solution.vehicle_duals.size(); ++a) {
    os << "dual_vehicle " << a << ' ' << detail::exact(solution.vehicle_duals[a]) << '\n';
  }
  for (std::size_t b = 0; b < solution.request_duals.size(); ++b) {
    os << "dual_request " << b << ' ' << detail::exact(solution.request_duals[b]) << '\n';
  }
}

namespace {

bool same_vehicle_class(const Vehicle& l, const Vehicle& r) {
  return l.location == r.location && l.heading == r.heading && l.offset == r.offset &&
         l.assigned == r.assigned && l.route == r.route;
}

bool same_request_class(const Request& l, const Request& r) {
  return l.origin == r.origin && l.destination == r.destination && l.passengers == r.passengers &&
         l.deadline == r.deadline && l.picked_up == r.picked_up;
}

}  // namespace

DecisionProblem enumerate_candidates(std::span<const Vehicle> vehicles,
                                     std::span<const Request> requests, Seconds now,
                                     const TravelTimeOracle& oracle, const Limits& limits,
                                     std::span<const Location> rebalance_points,
                                     const PostValueFn* value_fn) {
  DecisionProblem dp;
  dp.rebalance_points.assign(rebalance_points.begin(), rebalance_points.end());

  // Classes by exact attribute equality; vehicles are grouped by location first.
  std::map<std::pair<Location, Location>, std::vector<std::size_t>> by_position;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const Vehicle& v = vehicles[i];
    auto& bucket = by_position[{v.location, v.heading.value_or(-1)}];
    bool placed = false;
    for (std::size_t cls : bucket) {
      if (same_vehicle_class(vehicles[dp.vehicle_members[cls].front()], v)) {
        dp.vehicle_members[cls].push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      bucket.push_back(dp.vehicle_members.size());
      dp.vehicle_members.push_back({i});
    }
  }
  // Keep class numbering in first-vehicle order.
  std::sort(dp.vehicle_members.begin(), dp.vehicle_members.end(),
            [](const auto& l, const auto& r) { return l.front() < r.front(); });

  for (std::size_t j = 0; j < requests.size(); ++j) {
    bool placed = false;
    for (auto& members : dp.request_members) {
      if (same_request_class(requests[members.front()], requests[j])) {
        members.push_back(j);
        placed = true;
        break;
      }
    }
    if (!placed) dp.request_members.push_back({j});
  }

  for (const auto& m : dp.vehicle_members) dp.lp.vehicle_counts.push_back(static_cast<int>(m.size()));
  for (const auto& m : dp.request_members) dp.lp.request_counts.push_back(static_cast<int>(m.size()));

  auto value_of = [&](const Vehicle& after, std::size_t index) {
    return value_fn != nullptr && *value_fn ? (*value_fn)(after, index) : 0.0;
  };

  for (std::size_t a = 0; a < dp.vehicle_members.size(); ++a) {
    const std::size_t rep = dp.vehicle_members[a].front();
    const Vehicle& v = vehicles[rep];
    for (std::size_t b = 0; b < dp.request_members.size(); ++b) {
      const Request& r = requests[dp.request_members[b].front()];
      FeasibilityVerdict verdict = check_insertion(v, r, now, oracle, limits);
      if (!verdict.feasible) continue;
      Vehicle after = v;
      apply_insertion(after, r, *verdict.best_order);
      Candidate c;
      c.vehicle_class = static_cast<int>(a);
      c.kind = ActionKind::Serve;
      c.request_class = static_cast<int>(b);
      c.coefficient = 1.0 + value_of(after, rep);
      dp.lp.candidates.push_back(c);
      dp.plans.push_back(std::move(verdict.best_order));
    }
    if (v.assigned.empty()) {
      for (std::size_t p = 0; p < rebalance_points.size(); ++p) {
        Vehicle after = v;
        relocate(after, rebalance_points[p]);
        Candidate c;
        c.vehicle_class = static_cast<int>(a);
        c.kind = ActionKind::Relocate;
        c.point = static_cast<int>(p);
        c.coefficient = value_of(after, rep);
        dp.lp.candidates.push_back(c);
        dp.plans.emplace_back();
      }
    }
    Candidate null;
    null.vehicle_class = static_cast<int>(a);
    null.kind = ActionKind::Null;
    null.coefficient = value_of(v, rep);
    dp.lp.candidates.push_back(null);
    dp.plans.emplace_back();
  }
  return dp;
}

Vehicle apply_candidate(const DecisionProblem& problem, std::size_t c, const Vehicle& vehicle,
                        const Request* request, Seconds now, const TravelTimeOracle& oracle,
                        const Limits& limits) {
  const Candidate& cand = problem.lp.candidates[c];
  Vehicle after = vehicle;
  switch (cand.kind) {
    case ActionKind::Null:
      break;
    case ActionKind::Relocate:
      relocate(after, problem.rebalance_points[static_cast<std::size_t>(cand.point)]);
      break;
    case ActionKind::Serve: {
      if (request == nullptr) throw ContractError("Serve needs a request");
      const RoutePlan* plan = problem.plans[c] ? &*problem.plans[c] : nullptr;
      bool same_ids = plan != nullptr && plan->stops.front().request == request->id;
      FeasibilityVerdict verdict;
      if (!same_ids) {
        // Another member of the same request class: identical attributes, new id.
        verdict = check_insertion(vehicle, *request, now, oracle, limits);
        if (!verdict.feasible) throw InternalError("class member lost feasibility");
        plan = &*verdict.best_order;
      }
      apply_insertion(after, *request, *plan);
      break;
    }
  }
  return after;
}

}  // namespace ridepool
