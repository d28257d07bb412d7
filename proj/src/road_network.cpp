#include "ridepool/road_network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "text_util.hpp"

namespace ridepool {

namespace {

void build_adjacency(int node_count, const std::vector<Arc>& arcs,
                     std::vector<std::vector<std::pair<Location, Seconds>>>& adjacency) {
  adjacency.assign(static_cast<std::size_t>(node_count), {});
  for (const Arc& arc : arcs) {
    adjacency[static_cast<std::size_t>(arc.from)].emplace_back(arc.to, arc.seconds);
  }
}

// Forward and reverse reachability from node 0.
bool reaches_all(int node_count, const std::vector<std::vector<Location>>& adj) {
  std::vector<char> seen(static_cast<std::size_t>(node_count), 0);
  std::vector<Location> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    Location u = stack.back();
    stack.pop_back();
    for (Location v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == node_count;
}

}  // namespace

bool strongly_connected(int node_count, const std::vector<Arc>& arcs) {
  if (node_count <= 1) return node_count == 1;
  std::vector<std::vector<Location>> fwd(static_cast<std::size_t>(node_count));
  std::vector<std::vector<Location>> rev(static_cast<std::size_t>(node_count));
  for (const Arc& a : arcs) {
    fwd[static_cast<std::size_t>(a.from)].push_back(a.to);
    rev[static_cast<std::size_t>(a.to)].push_back(a.from);
  }
  return reaches_all(node_count, fwd) && reaches_all(node_count, rev);
}

RoadNetwork RoadNetwork::from_arcs(int node_count, bool directed, std::vector<Arc> arcs,
                                   std::optional<GridShape> grid) {
  if (node_count < 1) throw ValidationError("network needs at least one node");
  for (const Arc& a : arcs) {
    if (a.from < 0 || a.from >= node_count || a.to < 0 || a.to >= node_count) {
      throw ValidationError(fmt::format("arc {}->{} references a node outside [0, {})", a.from,
                                        a.to, node_count));
    }
    if (a.from == a.to) throw ValidationError(fmt::format("self-loop at node {}", a.from));
    if (a.seconds < 1) {
      throw ValidationError(
          fmt::format("arc {}->{} has non-positive weight {}", a.from, a.to, a.seconds));
    }
  }
  std::sort(arcs.begin(), arcs.end(), [](const Arc& l, const Arc& r) {
    return std::tie(l.from, l.to) < std::tie(r.from, r.to);
  });
  for (std::size_t i = 1; i < arcs.size(); ++i) {
    if (arcs[i].from == arcs[i - 1].from && arcs[i].to == arcs[i - 1].to) {
      throw ValidationError(fmt::format("duplicate arc {}->{}", arcs[i].from, arcs[i].to));
    }
  }
  if (!directed) {
    // Add missing reverse arcs; reject asymmetric weights.
    std::vector<Arc> reverse;
    for (const Arc& a : arcs) {
      auto it = std::lower_bound(arcs.begin(), arcs.end(), Arc{a.to, a.from, 0},
                                 [](const Arc& l, const Arc& r) {
                                   return std::tie(l.from, l.to) < std::tie(r.from, r.to);
                                 });
      if (it != arcs.end() && it->from == a.to && it->to == a.from) {
        if (it->seconds != a.seconds) {
          throw ValidationError(fmt::format("undirected edge {}-{} has weights {} and {}", a.from,
                                            a.to, a.seconds, it->seconds));
        }
      } else {
        reverse.push_back(Arc{a.to, a.from, a.seconds});
      }
    }
    arcs.insert(arcs.end(), reverse.begin(), reverse.end());
    std::sort(arcs.begin(), arcs.end(), [](const Arc& l, const Arc& r) {
      return std::tie(l.from, l.to) < std::tie(r.from, r.to);
    });
  }
  if (!strongly_connected(node_count, arcs)) {
    throw ValidationError("network is not strongly connected");
  }
  if (grid && grid->rows * grid->cols != node_count) {
    throw ValidationError("grid shape does not match node count");
  }
  RoadNetwork net;
  net.node_count_ = node_count;
  net.directed_ = directed;
  net.arcs_ = std::move(arcs);
  net.grid_ = grid;
  build_adjacency(node_count, net.arcs_, net.adjacency_);
  return net;
}

std::vector<Arc> RoadNetwork::edges() const {
  if (directed_) return arcs_;
  std::vector<Arc> out;
  out.reserve(arcs_.size() / 2);
  for (const Arc& a : arcs_) {
    if (a.from < a.to) out.push_back(a);
  }
  return out;
}

void RoadNetwork::write(std::ostream& os) const {
  os << "nodes=" << node_count_ << " directed=" << (directed_ ? 1 : 0) << '\n';
  for (const Arc& a : arcs_) os << a.from << ',' << a.to << ',' << a.seconds << '\n';
}

RoadNetwork read_network(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<int> nodes;
  std::optional<bool> directed;
  std::vector<Arc> arcs;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!nodes) {
      std::istringstream header{std::string(view)};
      std::string token;
      while (header >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos) {
          throw ParseError(fmt::format("line {}: bad header token '{}'", line_no, token));
        }
        std::string key = token.substr(0, eq);
        std::string_view value = std::string_view(token).substr(eq + 1);
        if (key == "nodes") {
          nodes = static_cast<int>(detail::parse_int(value, line_no));
        } else if (key == "directed") {
          auto flag = detail::parse_int(value, line_no);
          if (flag != 0 && flag != 1) {
            throw ParseError(fmt::format("line {}: directed must be 0 or 1", line_no));
          }
          directed = flag == 1;
        } else {
          throw ParseError(fmt::format("line {}: unknown header key '{}'", line_no, key));
        }
      }
      if (!nodes || !directed) {
        throw ParseError(fmt::format("line {}: header needs nodes= and directed=", line_no));
      }
      continue;
    }
    auto fields = detail::split(view, ',');
    if (fields.size() != 3) {
      throw ParseError(fmt::format("line {}: expected from,to,weight_seconds", line_no));
    }
    Arc arc;
    arc.from = static_cast<Location>(detail::parse_int(fields[0], line_no));
    arc.to = static_cast<Location>(detail::parse_int(fields[1], line_no));
    arc.seconds = detail::parse_int(fields[2], line_no);
    arcs.push_back(arc);
  }
  if (!nodes) throw ParseError("missing header line");
  return RoadNetwork::from_arcs(*nodes, *directed, std::move(arcs));
}

RoadNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open network file '{}'", path));
  return read_network(in);
}

void save_network(const RoadNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  net.write(out);
}

RoadNetwork generate_grid(int rows, int cols, WeightRange weights, bool directed,
                          std::uint64_t seed) {
  if (rows < 2 || cols < 2) throw ContractError("grid needs at least 2 rows and 2 columns");
  if (weights.min < 1 || weights.max < weights.min) {
    throw ContractError("grid weights need 1 <= min <= max");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Seconds> draw(weights.min, weights.max);
  std::vector<Arc> arcs;
  auto add = [&](Location u, Location v) {
    Seconds w = draw(rng);
    arcs.push_back({u, v, w});
    arcs.push_back({v, u, directed ? draw(rng) : w});
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Location u = r * cols + c;
      if (c + 1 < cols) add(u, u + 1);
      if (r + 1 < rows) add(u, u + cols);
    }
  }
  return RoadNetwork::from_arcs(rows * cols, directed, std::move(arcs), GridShape{rows, cols});
}

RoadNetwork remove_edges(const RoadNetwork& net, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ContractError("edge removal fraction must lie in [0, 1)");
  }
  std::vector<Arc> remaining = net.edges();
  const std::size_t total = remaining.size();
  const auto target = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
  if (target == 0) return net;

  auto expand = [&](const std::vector<Arc>& edges) {
    if (net.directed()) return edges;
    std::vector<Arc> arcs;
    arcs.reserve(edges.size() * 2);
    for (const Arc& e : edges) {
      arcs.push_back(e);
      arcs.push_back({e.to, e.from, e.seconds});
    }
    return arcs;
  };

  std::mt19937_64 rng(seed);
  constexpr int kMaxDraws = 100;
  for (std::size_t removed = 0; removed < target; ++removed) {
    bool done = false;
    for (int draw = 0; draw < kMaxDraws && !done; ++draw) {
      std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
      std::size_t idx = pick(rng);
      std::vector<Arc> trial = remaining;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(idx));
      if (strongly_connected(net.node_count(), expand(trial))) {
        remaining = std::move(trial);
        done = true;
      }
    }
    if (!done) {
      throw ValidationError(fmt::format(
          "cannot remove {:.4f} of edges without disconnecting the network; achieved {:.4f} "
          "({} of {})",
          fraction, static_cast<double>(removed) / static_cast<double>(total), removed, total));
    }
  }
  return RoadNetwork::from_arcs(net.node_count(), net.directed(), expand(remaining), net.grid());
}

TravelTimeOracle::TravelTimeOracle(const RoadNetwork& net) {
  const int n = net.node_count();
  constexpr Seconds kInf = std::numeric_limits<Seconds>::max() / 4;
  times_ = TimeMatrix::Constant(n, n, kInf);
  next_hop_ = HopMatrix::Constant(n, n, -1);
  arc_weight_.assign(static_cast<std::size_t>(n), {});
  for (const Arc& a : net.arcs()) arc_weight_[static_cast<std::size_t>(a.from)][a.to] = a.seconds;

  using Item = std::pair<Seconds, Location>;
  std::vector<Seconds> dist(static_cast<std::size_t>(n));
  std::vector<Location> first(static_cast<std::size_t>(n));
  for (Location src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(first.begin(), first.end(), -1);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[static_cast<std::size_t>(src)] = 0;
    first[static_cast<std::size_t>(src)] = src;
    heap.emplace(0, src);
    while (!heap.empty()) {
      auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[static_cast<std::size_t>(u)]) continue;
      for (auto [v, w] : net.out(u)) {
        Seconds nd = d + w;
        if (nd < dist[static_cast<std::size_t>(v)]) {
          dist[static_cast<std::size_t>(v)] = nd;
          first[static_cast<std::size_t>(v)] = (u == src) ? v : first[static_cast<std::size_t>(u)];
          heap.emplace(nd, v);
        }
      }
    }
    for (Location v = 0; v < n; ++v) {
      if (dist[static_cast<std::size_t>(v)] >= kInf) {
        throw ValidationError("travel-time oracle needs a strongly connected network");
      }
      times_(src, v) = dist[static_cast<std::size_t>(v)];
      next_hop_(src, v) = first[static_cast<std::size_t>(v)];
    }
  }
}

Seconds TravelTimeOracle::arc_seconds(Location from, Location to) const {
  const auto& row = arc_weight_[static_cast<std::size_t>(from)];
  auto it = row.find(to);
  if (it == row.end()) throw InternalError(fmt::format("no arc {}->{}", from, to));
  return it->second;
}

std::vector<Location> TravelTimeOracle::path(Location from, Location to) const {
  std::vector<Location> nodes{from};
  while (from != to) {
    from = next_hop(from, to);
    nodes.push_back(from);
  }
  return nodes;
}

AggregationHierarchy::AggregationHierarchy(std::vector<int> zone_counts,
                                           std::vector<std::vector<int>> maps)
    : zone_counts_(std::move(zone_counts)), maps_(std::move(maps)) {}

namespace {

std::optional<std::pair<int, int>> block_factors(const GridShape& grid, int zones) {
  std::optional<std::pair<int, int>> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int kr = 1; kr <= grid.rows; ++kr) {
    if (zones % kr != 0) continue;
    int kc = zones / kr;
    if (kc > grid.cols) continue;
    double score = std::abs(static_cast<double>(grid.rows) / kr - static_cast<double>(grid.cols) / kc);
    if (score < best_score - 1e-12) {
      best_score = score;
      best = std::pair{kr, kc};
    }
  }
  return best;
}

std::vector<int> grid_blocks(const GridShape& grid, int kr, int kc) {
  std::vector<int> map(static_cast<std::size_t>(grid.rows * grid.cols));
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      int zr = r * kr / grid.rows;
      int zc = c * kc / grid.cols;
      map[static_cast<std::size_t>(r * grid.cols + c)] = zr * kc + zc;
    }
  }
  return map;
}

std::vector<int> k_medoids(const TravelTimeOracle& oracle, int k, std::uint64_t seed) {
  const int n = oracle.node_count();
  auto dist = [&](Location a, Location b) {
    return oracle.travel_time(a, b) + oracle.travel_time(b, a);
  };
  std::mt19937_64 rng(seed);
  std::vector<Location> medoids{
      static_cast<Location>(std::uniform_int_distribution<int>(0, n - 1)(rng))};
  std::vector<Seconds> nearest(static_cast<std::size_t>(n));
  for (Location v = 0; v < n; ++v) nearest[static_cast<std::size_t>(v)] = dist(v, medoids[0]);
  while (static_cast<int>(medoids.size()) < k) {
    Location far = 0;
    for (Location v = 1; v < n; ++v) {
      if (nearest[static_cast<std::size_t>(v)] > nearest[static_cast<std::size_t>(far)]) far = v;
    }
    medoids.push_back(far);
    for (Location v = 0; v < n; ++v) {
      nearest[static_cast<std::size_t>(v)] = std::min(nearest[static_cast<std::size_t>(v)], dist(v, far));
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (Location v = 0; v < n; ++v) {
      int best = 0;
      for (int m = 1; m < k; ++m) {
        if (dist(v, medoids[static_cast<std::size_t>(m)]) <
            dist(v, medoids[static_cast<std::size_t>(best)])) {
          best = m;
        }
      }
      assign[static_cast<std::size_t>(v)] = best;
    }
    bool changed = false;
    for (int m = 0; m < k; ++m) {
      Location best = medoids[static_cast<std::size_t>(m)];
      Seconds best_cost = std::numeric_limits<Seconds>::max();
      for (Location c = 0; c < n; ++c) {
        if (assign[static_cast<std::size_t>(c)] != m) continue;
        Seconds cost = 0;
        for (Location v = 0; v < n; ++v) {
          if (assign[static_cast<std::size_t>(v)] == m) cost += dist(c, v);
        }
        if (cost < best_cost) {
          best_cost = cost;
          best = c;
        }
      }
      if (best != medoids[static_cast<std::size_t>(m)]) {
        medoids[static_cast<std::size_t>(m)] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  // Final assignment against the settled medoids, zones numbered by medoid id.
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int l, int r) {
    return medoids[static_cast<std::size_t>(l)] < medoids[static_cast<std::size_t>(r)];
  });
  std::vector<int> rank(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;
  std::vector<int> map(static_cast<std::size_t>(n));
  for (Location v = 0; v < n; ++v) {
    int best = 0;
    for (int m = 1; m < k; ++m) {
      if (dist(v, medoids[static_cast<std::size_t>(m)]) <
          dist(v, medoids[static_cast<std::size_t>(best)])) {
        best = m;
      }
    }
    map[static_cast<std::size_t>(v)] = rank[static_cast<std::size_t>(best)];
  }
  return map;
}

}  // namespace

AggregationHierarchy build_aggregation(const RoadNetwork& net, const TravelTimeOracle& oracle,
                                       const std::vector<int>& zone_counts, std::uint64_t seed) {
  const int n = net.node_count();
  if (zone_counts.empty()) throw ValidationError("zone_counts must not be empty");
  if (zone_counts.front() != n) {
    throw ValidationError(
        fmt::format("first zone count must equal the node count {} (got {})", n, zone_counts.front()));
  }
  for (std::size_t i = 1; i < zone_counts.size(); ++i) {
    if (zone_counts[i] < 1 || zone_counts[i] >= zone_counts[i - 1]) {
      throw ValidationError("zone counts must be positive and strictly decreasing");
    }
  }
  std::vector<std::vector<int>> maps;
  std::vector<int> identity(static_cast<std::size_t>(n));
  std::iota(identity.begin(), identity.end(), 0);
  maps.push_back(std::move(identity));
  for (std::size_t level = 1; level < zone_counts.size(); ++level) {
    int k = zone_counts[level];
    std::optional<std::pair<int, int>> blocks;
    if (net.grid()) blocks = block_factors(*net.grid(), k);
    if (blocks) {
      maps.push_back(grid_blocks(*net.grid(), blocks->first, blocks->second));
    } else {
      maps.push_back(k_medoids(oracle, k, seed + level));
    }
  }
  return AggregationHierarchy(zone_counts, std::move(maps));
}

std::vector<Location> select_rebalance_points(const AggregationHierarchy& hierarchy, int level,
                                              const std::map<Location, std::int64_t>& pickups) {
  if (level < 0 || level >= hierarchy.levels()) throw ContractError("aggregation level out of range");
  const int zones = hierarchy.zone_count(level);
  const auto& map = hierarchy.map(level);
  std::vector<Location> best(static_cast<std::size_t>(zones), -1);
  std::vector<std::int64_t> best_count(static_cast<std::size_t>(zones), -1);
  for (Location v = 0; v < static_cast<Location>(map.size()); ++v) {
    auto it = pickups.find(v);
    std::int64_t count = it == pickups.end() ? 0 : it->second;
    auto z = static_cast<std::size_t>(map[static_cast<std::size_t>(v)]);
    if (count > best_count[z]) {  // ascending scan keeps the smallest id on ties
      best_count[z] = count;
      best[z] = v;
    }
  }
  return best;
}

std::map<Location, std::int64_t> load_pickup_counts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open pickup-count file '{}'", path));
  std::map<Location, std::int64_t> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = detail::split(view, ',');
    if (fields.size() != 2) throw ParseError(fmt::format("line {}: expected location_id,count", line_no));
    if (line_no == 1 && !detail::is_int(fields[0])) continue;  // header
    counts[static_cast<Location>(detail::parse_int(fields[0], line_no))] +=
        detail::parse_int(fields[1], line_no);
  }
  return counts;
}

void save_pickup_counts(const std::map<Location, std::int64_t>& counts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  for (const auto& [loc, count] : counts) out << loc << ',' << count << '\n';
}

}  // namespace ridepool
