#include <doctest.h>

#include <map>
#include <sstream>

#include "oracles.hpp"
#include "ridepool/road_network.hpp"
#include "ridepool/trainer.hpp"
#include "toy_dp.hpp"

using namespace ridepool;

namespace {

struct Grid {
  RoadNetwork net;
  TravelTimeOracle oracle;
  AggregationHierarchy hierarchy;
  Environment env;
  ArrivalModel model;

  Grid(int horizon, double rate) : net(generate_grid(4, 4, {20, 40}, false, 3)), oracle(net) {
    hierarchy = build_aggregation(net, oracle, {16, 4, 1});
    env.oracle = &oracle;
    env.hierarchy = &hierarchy;
    env.horizon = horizon;
    env.rebalance_points = {0, 10};
    model.rates.assign(static_cast<std::size_t>(horizon), rate);
    model.od = {{0, 15, 0.25}, {15, 0, 0.25}, {5, 6, 0.25}, {9, 3, 0.25}};
    model.passenger_sizes = {0.5, 0.3, 0.1, 0.1};
    env.mean_rate = model.mean_rate();
  }
  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;

  DeadlineRule rule() const { return {&oracle, env.limits.wait_max, env.limits.delay_max, env.limits.epoch_seconds}; }
};

PostDecisionKey key0(int epoch, int zone) {
  PostDecisionKey k;
  k.epoch = epoch;
  k.zone = zone;
  return k;
}

}  // namespace

TEST_CASE("marginals") {
  AssignmentProblem lone;
  lone.vehicle_counts = {1};
  lone.candidates = {{0, ActionKind::Null, -1, -1, 0.0}};
  CHECK(extract_marginals(lone, solve(lone)) == std::map<int, double>{{0, 0.0}});

  AssignmentProblem serve;
  serve.vehicle_counts = {1};
  serve.request_counts = {1};
  serve.candidates = {{0, ActionKind::Serve, 0, -1, 1.0}, {0, ActionKind::Null, -1, -1, 0.0}};
  CHECK(extract_marginals(serve, solve(serve)).at(0) == doctest::Approx(1.0));

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    AssignmentProblem p = oracle::random_problem(rng, 4, 4);
    std::map<int, double> marginals = extract_marginals(p, solve(p));
    CHECK(marginals.size() == p.vehicle_counts.size());
    for (auto [a, v] : marginals) {
      oracle::ResolveDual d = oracle::resolve_difference(p, static_cast<std::size_t>(a));
      if (d.unique) CHECK(v == doctest::Approx(d.value).epsilon(1e-9));
    }
  }
}

TEST_CASE("propagate") {
  ValueTable table(1);
  std::vector<TransitionRecord> one{{7, {key0(2, 3)}, 0}};
  CHECK(propagate(one, {{0, 1.0}}, table) == std::vector<double>{1.0});
  CHECK(table.find(key0(2, 3))->estimate == 1.0);

  ValueTable shared(1);
  std::vector<TransitionRecord> two{{1, {key0(1, 4)}, 2}, {2, {key0(1, 9)}, 2}};
  CHECK(propagate(two, {{0, 0.5}, {2, 2.5}}, shared) == std::vector<double>{2.5, 2.5});
  CHECK(shared.find(key0(1, 4))->estimate == 2.5);
  CHECK(shared.find(key0(1, 9))->estimate == 2.5);

  std::vector<TransitionRecord> orphan{{3, {key0(1, 1)}, 5}};
  CHECK_THROWS_AS(propagate(orphan, {{0, 1.0}}, shared), InternalError);
}

TEST_CASE("empty demand") {
  Grid g(5, 0.0);
  TrainingConfig config;
  config.iterations = 1;
  config.fleet_size = 4;
  TrainingResult r = train(config, g.env, g.model, ValueTable(3));
  REQUIRE(r.log.size() == 1);
  CHECK(r.log[0].requests_seen == 0);
  CHECK(r.log[0].requests_served == 0);
  CHECK(r.log[0].mean_dual == 0.0);
  CHECK(r.table.size() > 0);
  std::ostringstream text;
  r.table.write(text);
  std::istringstream lines(text.str());
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '|');) fields.push_back(f);
    REQUIRE(fields.size() == 8);
    CHECK(std::stod(fields[3]) == 0.0);
  }
}

TEST_CASE("training is reproducible") {
  Grid g(8, 3.0);
  TrainingConfig config;
  config.iterations = 2;
  config.fleet_size = 5;
  config.seed = 77;
  TrainingResult a = train(config, g.env, g.model, ValueTable(3));
  TrainingResult b = train(config, g.env, g.model, ValueTable(3));
  CHECK(a.table == b.table);
  CHECK(a.log == b.log);
  config.seed = 78;
  CHECK_FALSE(train(config, g.env, g.model, ValueTable(3)).table == a.table);

  // Resuming continues from where the first call stopped.
  TrainingConfig first = config;
  first.iterations = 1;
  TrainingConfig second = config;
  second.iterations = 1;
  second.first_iteration = 2;
  TrainingResult half = train(first, g.env, g.model, ValueTable(3));
  TrainingResult rest = train(second, g.env, g.model, half.table);
  CHECK(rest.table == train(config, g.env, g.model, ValueTable(3)).table);
  CHECK(rest.log[0].iteration == 2);

  CHECK(derive_seed(1, 1, 1) == derive_seed(1, 1, 1));
  CHECK(derive_seed(1, 1, 1) != derive_seed(1, 2, 1));
  CHECK(derive_seed(1, 1, 1) != derive_seed(1, 1, 2));
  CHECK(derive_seed(1, 1, 1) != derive_seed(2, 1, 1));
}

TEST_CASE("one iteration against hand bookkeeping") {
  // Two vehicles, three epochs, four requests on a 4x4 grid.
  Grid g(3, 0.0);
  g.env.limits.wait_max = 60;
  const DeadlineRule rule = g.rule();
  auto req = [&](RequestId id, Location o, Location d, int epoch) {
    Request r;
    r.id = id;
    r.origin = o;
    r.destination = d;
    r.arrival_epoch = epoch;
    r.deadline = rule.deadline(r);
    return r;
  };
  SamplePath day;
  day.epochs = {{req(1, 0, 5, 1), req(2, 10, 15, 1)}, {req(3, 6, 3, 2)}, {req(4, 12, 2, 3)}};

  TrainingConfig config;
  config.iterations = 1;
  config.fleet_size = 2;
  config.seed = 5;
  TrainingResult trained = train(config, g.env, std::span<const SamplePath>(&day, 1), ValueTable(3));

  // Replay the same iteration by hand: run the epochs with an empty table,
  // read each vehicle's class dual, check it against re-solving, and push it
  // through an independent step-size recursion.
  ValueTable empty(3);
  SystemState s = initial_state(random_fleet(2, 16, derive_seed(5, 2, 1)), day);
  Policy policy{PolicyKind::Adp, &empty, true};
  std::map<PostDecisionKey, oracle::BakfReference> expected;
  std::vector<std::vector<PostDecisionKey>> previous;
  int checked = 0;
  for (int t = 1; t <= 3; ++t) {
    StepTrace trace;
    step(g.env, s, policy, t < 3 ? day.at(t + 1) : std::vector<Request>{}, &trace);
    for (std::size_t a = 0; a < trace.problem.vehicle_counts.size(); ++a) {
      const AssignmentProblem& p = trace.problem;
      std::vector<int> more = p.vehicle_counts;
      std::vector<int> fewer = p.vehicle_counts;
      ++more[a];
      --fewer[a];
      const double base = oracle::brute_force_objective(p);
      const double right = oracle::brute_force_objective(p, more) - base;
      const double left = base - oracle::brute_force_objective(p, fewer);
      const double dual = trace.solution.vehicle_duals[a];
      CHECK(dual >= right - 1e-9);
      CHECK(dual <= left + 1e-9);
      ++checked;
    }
    if (!previous.empty()) {
      for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
        const double v = trace.solution.vehicle_duals[static_cast<std::size_t>(trace.vehicle_class[i])];
        for (const PostDecisionKey& k : previous[i]) expected[k].observe(v);
      }
    }
    previous = trace.post_keys;
  }
  CHECK(checked >= 3);
  REQUIRE(trained.table.size() == expected.size());
  for (const auto& [k, ref] : expected) {
    const ValueEntry* e = trained.table.find(k);
    REQUIRE(e != nullptr);
    CHECK(e->estimate == doctest::Approx(ref.theta).epsilon(1e-12));
    CHECK(e->count == ref.seen);
  }
  CHECK(trained.log[0].requests_seen == 4);
}

TEST_CASE("estimates stay within the reachable reward") {
  Grid g(12, 4.0);
  TrainingConfig config;
  config.iterations = 30;
  config.fleet_size = 6;
  TrainingResult r = train(config, g.env, g.model, ValueTable(3));
  std::ostringstream text;
  r.table.write(text);
  std::istringstream in(text.str());
  std::string line;
  std::getline(in, line);
  int entries = 0;
  while (std::getline(in, line)) {
    const int epoch = std::stoi(line.substr(0, line.find('|')));
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '|');) fields.push_back(f);
    const double estimate = std::stod(fields[3]);
    CHECK(estimate >= -1e-9);
    CHECK(estimate <= g.env.horizon - epoch + 1e-9);
    ++entries;
  }
  CHECK(entries > 50);
  for (const IterationLog& l : r.log) CHECK(l.requests_served <= l.requests_seen);
}

TEST_CASE("two-node toy converges to the exact values") {
  toy::TwoNodeToy world;
  std::map<PostDecisionKey, double> exact = world.exact_post_values();
  CHECK(exact.size() == 4);
  std::map<int, double> by_epoch_zone;
  for (const auto& [k, v] : exact) by_epoch_zone[k.epoch * 10 + k.zone] = v;
  CHECK(by_epoch_zone == std::map<int, double>{{10, 2.0}, {11, 2.0}, {20, 1.0}, {21, 1.0}});

  TrainingResult r = world.train(2000, 3);
  int visited = 0;
  for (const auto& [k, v] : exact) {
    const ValueEntry* e = r.table.find(k);
    if (e == nullptr) continue;
    ++visited;
    CHECK(std::abs(e->estimate - v) <= 0.05);
  }
  // Greedy decisions never revisit a key whose neighbour already looks
  // better, so only the keys on the chosen trajectories are learned. From B
  // that trajectory is optimal; from A the unlearned (1, B) makes waiting
  // look better than serving.
  CHECK(visited >= 2);
  CHECK(world.served_from(1, r.table) == 3);
  CHECK(world.served_from(0, r.table) == 2);
}
