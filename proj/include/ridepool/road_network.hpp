#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ridepool/common.hpp"

namespace ridepool {

struct Arc {
  Location from = 0;
  Location to = 0;
  Seconds seconds = 1;

  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Row-major lattice coordinates of a generated grid: node = row * cols + col.
struct GridShape {
  int rows = 0;
  int cols = 0;

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct WeightRange {
  Seconds min = 20;
  Seconds max = 40;
};

/// Weighted street graph. Undirected networks hold every edge as two
/// symmetric arcs; the arc list is kept sorted by (from, to).
class RoadNetwork {
 public:
  RoadNetwork() = default;

  /// Validates and normalizes. Throws ValidationError on dangling ids,
  /// non-positive weights, asymmetric undirected input or a graph that is
  /// not strongly connected.
  static RoadNetwork from_arcs(int node_count, bool directed, std::vector<Arc> arcs,
                               std::optional<GridShape> grid = std::nullopt);

  int node_count() const { return node_count_; }
  bool directed() const { return directed_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const std::optional<GridShape>& grid() const { return grid_; }

  /// Undirected: one entry per edge with from < to. Directed: the arcs.
  std::vector<Arc> edges() const;
  std::size_t edge_count() const { return directed_ ? arcs_.size() : arcs_.size() / 2; }

  /// Outgoing arcs of a node as (to, seconds) pairs.
  const std::vector<std::pair<Location, Seconds>>& out(Location node) const {
    return adjacency_[static_cast<std::size_t>(node)];
  }

  bool valid(Location node) const { return node >= 0 && node < node_count_; }

  /// Writes the `nodes=<N> directed=<0|1>` text format.
  void write(std::ostream& os) const;

 private:
  int node_count_ = 0;
  bool directed_ = false;
  std::vector<Arc> arcs_;
  std::optional<GridShape> grid_;
  std::vector<std::vector<std::pair<Location, Seconds>>> adjacency_;
};

RoadNetwork read_network(std::istream& is);
RoadNetwork load_network(const std::string& path);
void save_network(const RoadNetwork& net, const std::string& path);

bool strongly_connected(int node_count, const std::vector<Arc>& arcs);

/// 4-neighbour lattice with uniform integer weights. Directed mode draws the
/// two directions of each lattice edge independently.
RoadNetwork generate_grid(int rows, int cols, WeightRange weights, bool directed,
                          std::uint64_t seed);

/// Removes floor(fraction * edge_count) edges (arcs when directed) uniformly at
/// random while keeping the graph strongly connected. A candidate that would
/// disconnect the graph is put back and another is drawn; after 100 failed
/// draws for one edge the call gives up with a ValidationError.
RoadNetwork remove_edges(const RoadNetwork& net, double fraction, std::uint64_t seed);

/// All-pairs shortest travel times with next-hop routing.
class TravelTimeOracle {
 public:
  using TimeMatrix = Eigen::Matrix<Seconds, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using HopMatrix = Eigen::Matrix<Location, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  TravelTimeOracle() = default;
  explicit TravelTimeOracle(const RoadNetwork& net);

  int node_count() const { return static_cast<int>(times_.rows()); }

  Seconds travel_time(Location from, Location to) const { return times_(from, to); }

  /// First node after `from` on a shortest path to `to` (== to when adjacent,
  /// == from when from == to).
  Location next_hop(Location from, Location to) const { return next_hop_(from, to); }

  /// Weight of the direct arc; throws InternalError if none exists.
  Seconds arc_seconds(Location from, Location to) const;

  /// Node sequence from `from` to `to`, both inclusive.
  std::vector<Location> path(Location from, Location to) const;

  const TimeMatrix& times() const { return times_; }

 private:
  TimeMatrix times_;
  HopMatrix next_hop_;
  std::vector<std::map<Location, Seconds>> arc_weight_;
};

inline Seconds travel_time(const TravelTimeOracle& oracle, Location from, Location to) {
  return oracle.travel_time(from, to);
}

/// Multi-level spatial partition. Level 0 is the identity map.
class AggregationHierarchy {
 public:
  AggregationHierarchy() = default;
  AggregationHierarchy(std::vector<int> zone_counts, std::vector<std::vector<int>> maps);

  int levels() const { return static_cast<int>(zone_counts_.size()); }
  int zone_count(int level) const { return zone_counts_[static_cast<std::size_t>(level)]; }
  const std::vector<int>& zone_counts() const { return zone_counts_; }
  int zone(int level, Location node) const {
    return maps_[static_cast<std::size_t>(level)][static_cast<std::size_t>(node)];
  }
  const std::vector<int>& map(int level) const { return maps_[static_cast<std::size_t>(level)]; }

 private:
  std::vector<int> zone_counts_;
  std::vector<std::vector<int>> maps_;
};

/// zone_counts must start with the node count and be strictly decreasing.
/// Generated grids are cut into contiguous coordinate blocks; other networks
/// are clustered by travel-time k-medoids seeded with `seed`.
AggregationHierarchy build_aggregation(const RoadNetwork& net, const TravelTimeOracle& oracle,
                                       const std::vector<int>& zone_counts,
                                       std::uint64_t seed = 1);

/// One point per zone of `level`: the node with the most historical pickups,
/// smallest id on ties. Missing nodes count as zero.
std::vector<Location> select_rebalance_points(const AggregationHierarchy& hierarchy, int level,
                                              const std::map<Location, std::int64_t>& pickups);

std::map<Location, std::int64_t> load_pickup_counts(const std::string& path);
void save_pickup_counts(const std::map<Location, std::int64_t>& counts, const std::string& path);

}  // namespace ridepool
