#include <doctest.h>

#include <algorithm>
#include <functional>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "ridepool/road_network.hpp"

using namespace ridepool;

namespace {

RoadNetwork parse(const std::string& text) {
  std::istringstream in(text);
  return read_network(in);
}

// Shortest simple path by enumerating every simple path.
Seconds exhaustive_time(const RoadNetwork& net, Location from, Location to) {
  Seconds best = std::numeric_limits<Seconds>::max();
  std::vector<bool> used(static_cast<std::size_t>(net.node_count()), false);
  std::function<void(Location, Seconds)> walk = [&](Location at, Seconds t) {
    if (at == to) {
      best = std::min(best, t);
      return;
    }
    used[static_cast<std::size_t>(at)] = true;
    for (auto [next, w] : net.out(at)) {
      if (!used[static_cast<std::size_t>(next)]) walk(next, t + w);
    }
    used[static_cast<std::size_t>(at)] = false;
  };
  walk(from, 0);
  return best;
}

bool reaches_all_by_bfs(const RoadNetwork& net) {
  for (Location s = 0; s < net.node_count(); ++s) {
    std::vector<bool> seen(static_cast<std::size_t>(net.node_count()), false);
    std::queue<Location> q;
    q.push(s);
    seen[static_cast<std::size_t>(s)] = true;
    int count = 1;
    while (!q.empty()) {
      Location u = q.front();
      q.pop();
      for (auto [v, w] : net.out(u)) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = true;
          ++count;
          q.push(v);
        }
      }
    }
    if (count != net.node_count()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("network file parsing") {
  RoadNetwork two = parse("nodes=2 directed=1\n0,1,30\n1,0,30\n");
  CHECK(two.node_count() == 2);
  CHECK(two.arcs().size() == 2);

  CHECK_THROWS_AS(parse("nodes=2 directed=1\n0,1,0\n1,0,30\n"), ValidationError);
  CHECK_THROWS_AS(parse("nodes=2 directed=1\n0,1,-4\n1,0,30\n"), ValidationError);
  CHECK_THROWS_AS(parse("nodes=2 directed=1\n0,5,30\n1,0,30\n"), ValidationError);
  CHECK_THROWS_AS(parse("nodes=3 directed=1\n0,1,30\n1,0,30\n"), ValidationError);  // node 2 unreachable
  CHECK_THROWS_AS(parse("nodes=2 directed=1\n0,1,thirty\n"), ParseError);
  CHECK_THROWS_AS(parse("nodes=2 directed=1\n0,1,30,1\n"), ParseError);
  CHECK_THROWS_AS(parse("nodes=2 directed=1\n0,1,2.5\n1,0,3\n"), ParseError);
  CHECK_THROWS_AS(parse("0,1,30\n"), ParseError);
}

TEST_CASE("grid file round trip and edge count") {
  RoadNetwork grid = generate_grid(15, 15, {20, 40}, false, 7);
  std::ostringstream out;
  grid.write(out);
  RoadNetwork back = parse(out.str());
  CHECK(back.node_count() == 225);
  CHECK(back.arcs().size() == 840);  // 15*14 + 14*15 = 420 edges, both directions
  CHECK(back.arcs() == grid.arcs());
}

TEST_CASE("generate_grid") {
  RoadNetwork g = generate_grid(15, 15, {20, 40}, false, 7);
  CHECK(g.node_count() == 225);
  CHECK(g.edge_count() == 420);
  for (const Arc& a : g.arcs()) {
    CHECK(a.seconds >= 20);
    CHECK(a.seconds <= 40);
  }
  std::set<Seconds> distinct;
  for (const Arc& a : g.arcs()) distinct.insert(a.seconds);
  CHECK(distinct.size() > 10);

  RoadNetwork flat = generate_grid(2, 2, {5, 5}, false, 3);
  CHECK(flat.node_count() == 4);
  CHECK(flat.arcs().size() == 8);
  for (const Arc& a : flat.arcs()) CHECK(a.seconds == 5);

  CHECK(generate_grid(15, 15, {20, 40}, false, 7).arcs() == g.arcs());
  CHECK(generate_grid(15, 15, {20, 40}, false, 8).arcs() != g.arcs());

  RoadNetwork directed = generate_grid(4, 5, {20, 40}, true, 2);
  CHECK(directed.arcs().size() == 2 * (4 * 4 + 3 * 5));
  int asymmetric = 0;
  TravelTimeOracle o(directed);
  for (const Arc& a : directed.arcs()) asymmetric += o.arc_seconds(a.to, a.from) != a.seconds;
  CHECK(asymmetric > 0);

  CHECK_THROWS_AS(generate_grid(1, 5, {20, 40}, false, 1), ContractError);
  CHECK_THROWS_AS(generate_grid(3, 3, {0, 40}, false, 1), ContractError);
  CHECK_THROWS_AS(generate_grid(3, 3, {50, 40}, false, 1), ContractError);
}

TEST_CASE("remove_edges") {
  RoadNetwork g = generate_grid(15, 15, {20, 40}, false, 7);
  CHECK(remove_edges(g, 0.0, 1).arcs() == g.arcs());

  RoadNetwork cut = remove_edges(g, 0.2, 11);
  CHECK(cut.edge_count() == 336);
  CHECK(reaches_all_by_bfs(cut));
  TravelTimeOracle before(g);
  TravelTimeOracle after(cut);
  for (Location u = 0; u < 225; u += 7) {
    for (Location v = 0; v < 225; ++v) CHECK(after.travel_time(u, v) >= before.travel_time(u, v));
  }
  CHECK(remove_edges(g, 0.2, 11).arcs() == cut.arcs());

  // A 4-cycle needs 3 of its 4 edges to stay connected.
  RoadNetwork square = generate_grid(2, 2, {5, 5}, false, 1);
  CHECK_THROWS_AS(remove_edges(square, 0.99, 1), ValidationError);
  CHECK(remove_edges(square, 0.25, 1).edge_count() == 3);
  CHECK_THROWS_AS(remove_edges(square, 0.5, 1), ValidationError);

  RoadNetwork directed = generate_grid(5, 5, {20, 40}, true, 4);
  RoadNetwork dcut = remove_edges(directed, 0.3, 9);
  CHECK(dcut.arcs().size() == directed.arcs().size() - 24);  // floor(0.3 * 80)
  CHECK(reaches_all_by_bfs(dcut));
}

TEST_CASE("travel times") {
  RoadNetwork line = oracle::path_network({30, 20});
  TravelTimeOracle o(line);
  CHECK(o.travel_time(1, 1) == 0);
  CHECK(o.travel_time(0, 1) == 30);
  CHECK(o.travel_time(0, 2) == 50);
  CHECK(o.path(0, 2) == std::vector<Location>{0, 1, 2});
  CHECK(o.next_hop(2, 0) == 1);
  CHECK(o.next_hop(1, 1) == 1);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    // Random strongly connected 6-node digraph: a ring plus extra chords.
    std::uniform_int_distribution<Seconds> w(1, 50);
    std::uniform_int_distribution<int> node(0, 5);
    std::vector<Arc> arcs;
    std::set<std::pair<int, int>> used;
    for (int i = 0; i < 6; ++i) {
      arcs.push_back({i, (i + 1) % 6, w(rng)});
      used.insert({i, (i + 1) % 6});
    }
    for (int k = 0; k < 8; ++k) {
      int a = node(rng);
      int b = node(rng);
      if (a == b || !used.insert({a, b}).second) continue;
      arcs.push_back({a, b, w(rng)});
    }
    RoadNetwork net = RoadNetwork::from_arcs(6, true, arcs);
    TravelTimeOracle t(net);
    for (Location u = 0; u < 6; ++u) {
      for (Location v = 0; v < 6; ++v) {
        CHECK(t.travel_time(u, v) == exhaustive_time(net, u, v));
        Seconds along = 0;
        std::vector<Location> p = t.path(u, v);
        for (std::size_t i = 1; i < p.size(); ++i) along += t.arc_seconds(p[i - 1], p[i]);
        CHECK(along == t.travel_time(u, v));
      }
    }
  }
}

TEST_CASE("travel time properties on a grid") {
  RoadNetwork g = generate_grid(6, 7, {20, 40}, false, 3);
  TravelTimeOracle o(g);
  const int n = g.node_count();
  for (Location a = 0; a < n; ++a) {
    for (Location b = 0; b < n; ++b) {
      CHECK(o.travel_time(a, b) == o.travel_time(b, a));
      for (Location c = 0; c < n; c += 5) {
        CHECK(o.travel_time(a, c) <= o.travel_time(a, b) + o.travel_time(b, c));
      }
    }
  }
}

TEST_CASE("aggregation hierarchy") {
  RoadNetwork g10 = generate_grid(10, 10, {20, 40}, false, 1);
  TravelTimeOracle o10(g10);
  AggregationHierarchy h = build_aggregation(g10, o10, {100, 5});
  CHECK(h.levels() == 2);
  std::vector<int> sizes(5, 0);
  for (Location v = 0; v < 100; ++v) {
    CHECK(h.zone(0, v) == v);
    ++sizes[static_cast<std::size_t>(h.zone(1, v))];
  }
  CHECK(sizes == std::vector<int>(5, 20));

  AggregationHierarchy single = build_aggregation(g10, o10, {100});
  CHECK(single.levels() == 1);
  for (Location v = 0; v < 100; ++v) CHECK(single.zone(0, v) == v);

  RoadNetwork g15 = generate_grid(15, 15, {20, 40}, false, 1);
  TravelTimeOracle o15(g15);
  AggregationHierarchy blocks = build_aggregation(g15, o15, {225, 9});
  for (Location v = 0; v < 225; ++v) {
    int row = v / 15;
    int col = v % 15;
    CHECK(blocks.zone(1, v) == (row / 5) * 3 + col / 5);
  }

  CHECK_THROWS_AS(build_aggregation(g10, o10, {101, 5}), ValidationError);
  CHECK_THROWS_AS(build_aggregation(g10, o10, {100, 5, 5}), ValidationError);
  CHECK_THROWS_AS(build_aggregation(g10, o10, {100, 200}), ValidationError);

  // Networks without grid coordinates fall back to travel-time clustering.
  std::ostringstream text;
  g10.write(text);
  RoadNetwork loaded = parse(text.str());
  AggregationHierarchy k = build_aggregation(loaded, o10, {100, 7, 2}, 4);
  for (int level = 1; level < 3; ++level) {
    std::set<int> zones(k.map(level).begin(), k.map(level).end());
    CHECK(static_cast<int>(zones.size()) == k.zone_count(level));
    CHECK(*zones.begin() == 0);
    CHECK(*zones.rbegin() == k.zone_count(level) - 1);
  }
  CHECK(build_aggregation(loaded, o10, {100, 7, 2}, 4).map(1) == k.map(1));
}

TEST_CASE("rebalance points") {
  RoadNetwork g = generate_grid(15, 15, {20, 40}, false, 1);
  TravelTimeOracle o(g);
  AggregationHierarchy h = build_aggregation(g, o, {225, 9, 1});

  std::vector<Location> lowest = select_rebalance_points(h, 1, {});
  CHECK(lowest == std::vector<Location>{0, 5, 10, 75, 80, 85, 150, 155, 160});

  CHECK(select_rebalance_points(h, 2, {{3, 17}}) == std::vector<Location>{3});

  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::int64_t> count(0, 6);
  std::map<Location, std::int64_t> counts;
  for (Location v = 0; v < 225; ++v) counts[v] = count(rng);
  std::vector<Location> points = select_rebalance_points(h, 1, counts);
  REQUIRE(points.size() == 9);
  for (int z = 0; z < 9; ++z) {
    Location best = -1;
    for (Location v = 0; v < 225; ++v) {
      if (h.zone(1, v) == z && (best < 0 || counts[v] > counts[best])) best = v;
    }
    CHECK(points[static_cast<std::size_t>(z)] == best);
  }
}
