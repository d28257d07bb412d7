#include "ridepool/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ridepool/trainer.hpp"
#include "text_util.hpp"

namespace ridepool {

std::string ScenarioConfig::table_path() const {
  if (!table_file.empty()) return table_file;
  return (std::filesystem::path(output_dir) / "value_table.txt").string();
}

bool ScenarioConfig::wants(const std::string& policy) const {
  return std::find(policies.begin(), policies.end(), policy) != policies.end();
}

namespace {

std::int64_t to_int(const std::string& key, const std::string& value) {
  std::string_view v = detail::trim(value);
  if (!detail::is_int(v)) throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, value));
  return detail::parse_int(v, 0);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    double d = detail::parse_double(value, 0);
    if (!std::isfinite(d)) throw ParseError("not finite");
    return d;
  } catch (const ParseError&) {
    throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, value));
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  std::string v(detail::trim(value));
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, value));
}

std::vector<std::string> to_list(const std::string& value) {
  std::vector<std::string> out;
  if (detail::trim(value).empty()) return out;
  for (auto piece : detail::split(value, ',')) out.emplace_back(piece);
  return out;
}

int positive(const std::string& key, std::int64_t v, std::int64_t min = 1) {
  if (v < min) throw ConfigError(fmt::format("{} must be >= {}", key, min));
  return static_cast<int>(v);
}

double nonnegative(const std::string& key, double v) {
  if (v < 0.0) throw ConfigError(fmt::format("{} must be >= 0", key));
  return v;
}

using Setter = std::function<void(ScenarioConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const ScenarioConfig&)>;

struct Field {
  const char* key;
  Setter set;
  Getter get;
};

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return detail::exact(v);
  } else {
    return fmt::format("{}", v);
  }
}

#define RP_INT(name, member, min)                                                                  \
  Field {                                                                                          \
    name, [](ScenarioConfig& c, const std::string& k, const std::string& v) {                      \
      c.member = static_cast<decltype(c.member)>(positive(k, to_int(k, v), min));                  \
    },                                                                                             \
        [](const ScenarioConfig& c) { return show(c.member); }                                     \
  }
#define RP_REAL(name, member)                                                                      \
  Field {                                                                                          \
    name, [](ScenarioConfig& c, const std::string& k, const std::string& v) {                      \
      c.member = nonnegative(k, to_double(k, v));                                                  \
    },                                                                                             \
        [](const ScenarioConfig& c) { return show(c.member); }                                     \
  }
#define RP_BOOL(name, member)                                                                      \
  Field {                                                                                          \
    name, [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
        [](const ScenarioConfig& c) { return show(c.member); }                                     \
  }
#define RP_TEXT(name, member)                                                                      \
  Field {                                                                                          \
    name, [](ScenarioConfig& c, const std::string&, const std::string& v) {                        \
      c.member = std::string(detail::trim(v));                                                     \
    },                                                                                             \
        [](const ScenarioConfig& c) { return c.member; }                                           \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      RP_TEXT("network.file", network_file),
      RP_INT("grid.rows", grid_rows, 1),
      RP_INT("grid.cols", grid_cols, 1),
      RP_INT("grid.weight_min", weights.min, 1),
      RP_INT("grid.weight_max", weights.max, 1),
      RP_BOOL("grid.directed", directed),
      Field{"edge_removal",
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              double f = to_double(k, v);
              if (!(f >= 0.0 && f < 1.0)) throw ConfigError("edge_removal must lie in [0, 1)");
              c.edge_removal = f;
            },
            [](const ScenarioConfig& c) { return show(c.edge_removal); }},
      RP_TEXT("model.file", model_file),
      RP_INT("demand.communities", synthetic.communities, 1),
      RP_INT("demand.points_per_community", synthetic.points_per_community, 1),
      RP_INT("demand.hot_communities", synthetic.hot_communities, 0),
      RP_REAL("demand.hot_weight", synthetic.hot_weight),
      RP_REAL("demand.peak_rate", synthetic.peak_rate),
      RP_REAL("demand.curve_width", synthetic.curve_width),
      RP_REAL("demand.size_mean", synthetic.size_mean),
      RP_REAL("demand.size_sd", synthetic.size_sd),
      RP_REAL("demand.count_std", synthetic.count_std),
      RP_INT("horizon", horizon, 1),
      RP_INT("history_days", history_days, 1),
      RP_INT("wait_max", limits.wait_max, 0),
      RP_INT("delay_max", limits.delay_max, 0),
      Field{"wait_delay",
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              c.limits.wait_max = c.limits.delay_max = positive(k, to_int(k, v), 0);
            },
            nullptr},
      RP_INT("groups_max", limits.groups_max, 1),
      RP_INT("capacity_max", limits.capacity_max, 1),
      RP_INT("epoch_seconds", limits.epoch_seconds, 1),
      RP_INT("fleet_size", fleet_size, 1),
      RP_BOOL("rebalancing", rebalancing),
      Field{"zone_counts",
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              c.zone_counts.clear();
              for (const auto& z : to_list(v)) c.zone_counts.push_back(positive(k, to_int(k, z)));
            },
            [](const ScenarioConfig& c) { return fmt::format("{}", fmt::join(c.zone_counts, ",")); }},
      RP_INT("rebalance_level", rebalance_level, 0),
      RP_INT("iterations", iterations, 1),
      RP_REAL("bakf.eta0", bakf.eta0),
      RP_REAL("bakf.alpha_min", bakf.alpha_min),
      RP_REAL("bakf.prior_variation", bakf.prior_variation),
      RP_INT("replicates", replicates, 0),
      Field{"seed",
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              c.seed = static_cast<std::uint64_t>(positive(k, to_int(k, v), 0));
            },
            [](const ScenarioConfig& c) { return show(c.seed); }},
      Field{"policies",
            [](ScenarioConfig& c, const std::string&, const std::string& v) {
              c.policies = to_list(v);
              for (const auto& p : c.policies) {
                if (p != "myopic" && p != "adp") throw ConfigError(fmt::format("unknown policy '{}'", p));
              }
            },
            [](const ScenarioConfig& c) { return fmt::format("{}", fmt::join(c.policies, ",")); }},
      RP_TEXT("output_dir", output_dir),
      RP_TEXT("table.file", table_file),
      RP_BOOL("resume", resume),
  };
  return table;
}

#undef RP_INT
#undef RP_REAL
#undef RP_BOOL
#undef RP_TEXT

}  // namespace

void apply_setting(ScenarioConfig& config, const std::string& raw_key, const std::string& value) {
  const std::string key(detail::trim(raw_key));
  if (key.starts_with("sweep.")) {
    const std::string axis = key.substr(6);
    auto values = to_list(value);
    if (values.empty()) throw ConfigError(fmt::format("sweep axis '{}' has no values", axis));
    ScenarioConfig probe = config;
    for (const auto& v : values) apply_setting(probe, axis, v);
    auto it = std::find_if(config.sweep.begin(), config.sweep.end(), [&](const auto& a) { return a.first == axis; });
    if (it != config.sweep.end()) {
      it->second = values;
    } else {
      config.sweep.emplace_back(axis, values);
    }
    return;
  }
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown setting '{}'", key));
}

ScenarioConfig read_config(std::istream& is) {
  ScenarioConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = detail::trim(view.substr(0, hash));
    if (view.empty()) continue;
    auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    try {
      apply_setting(config, std::string(view.substr(0, eq)), std::string(view.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  return config;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path));
  return read_config(in);
}

void write_config(const ScenarioConfig& config, std::ostream& os) {
  for (const Field& f : fields()) {
    if (f.get) os << f.key << " = " << f.get(config) << '\n';
  }
  for (const auto& [axis, values] : config.sweep) os << "sweep." << axis << " = " << fmt::format("{}", fmt::join(values, ",")) << '\n';
}

Environment Scenario::environment() const {
  Environment env;
  env.oracle = &oracle;
  env.hierarchy = &hierarchy;
  env.limits = limits;
  env.rebalance_points = rebalance_points;
  env.mean_rate = model.mean_rate();
  env.horizon = horizon;
  return env;
}

DeadlineRule Scenario::deadline_rule() const {
  return DeadlineRule{&oracle, limits.wait_max, limits.delay_max, limits.epoch_seconds};
}

RoadNetwork build_network(const ScenarioConfig& config) {
  RoadNetwork net;
  if (!config.network_file.empty()) {
    if (!std::filesystem::exists(config.network_file)) {
      throw ConfigError(fmt::format("network file '{}' does not exist", config.network_file));
    }
    net = load_network(config.network_file);
  } else {
    net = generate_grid(config.grid_rows, config.grid_cols, config.weights, config.directed,
                        derive_seed(config.seed, 20, 0));
  }
  if (config.edge_removal > 0.0) net = remove_edges(net, config.edge_removal, derive_seed(config.seed, 21, 0));
  return net;
}

std::array<double, 4> truncated_normal_sizes(double mean, double sd) {
  std::array<double, 4> p{};
  if (!(sd > 0.0)) {
    int k = std::clamp(static_cast<int>(std::lround(mean)), 1, 4);
    p[static_cast<std::size_t>(k - 1)] = 1.0;
    return p;
  }
  auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); };
  double total = 0.0;
  for (int k = 1; k <= 4; ++k) {
    p[static_cast<std::size_t>(k - 1)] = cdf(k + 0.5) - cdf(k - 0.5);
    total += p[static_cast<std::size_t>(k - 1)];
  }
  if (!(total > 0.0)) throw ConfigError("passenger-size curve puts no mass on 1..4");
  for (double& x : p) x /= total;
  return p;
}

ArrivalModel synthetic_model(const RoadNetwork& network, const SyntheticDemand& demand, int horizon,
                             std::uint64_t seed) {
  const int n = network.node_count();
  const int k = std::min(demand.communities, n);
  if (demand.hot_communities > k) throw ConfigError("more hot communities than communities");
  if (demand.points_per_community < 1) throw ConfigError("each community needs a point");

  // Communities are the zones of a one-level partition (blocks on a grid).
  TravelTimeOracle oracle(network);
  std::vector<int> counts{n};
  if (k < n) counts.push_back(k);
  AggregationHierarchy h = build_aggregation(network, oracle, counts, seed);
  const int level = h.levels() - 1;
  std::vector<std::vector<Location>> members(static_cast<std::size_t>(k));
  for (Location v = 0; v < n; ++v) members[static_cast<std::size_t>(h.zone(level, v))].push_back(v);

  std::mt19937_64 rng(seed);
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> community_weight(static_cast<std::size_t>(k), 1.0);
  for (int i = 0; i < demand.hot_communities; ++i) {
    community_weight[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = demand.hot_weight;
  }

  struct Point {
    Location node;
    double origin_weight;
    double destination_weight;
  };
  std::vector<Point> points;
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  for (int z = 0; z < k; ++z) {
    auto nodes = members[static_cast<std::size_t>(z)];
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const auto take = std::min<std::size_t>(nodes.size(), static_cast<std::size_t>(demand.points_per_community));
    std::sort(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t i = 0; i < take; ++i) {
      double base = jitter(rng);
      points.push_back({nodes[i], base * community_weight[static_cast<std::size_t>(z)], jitter(rng)});
    }
  }
  if (points.size() < 2) throw ConfigError("synthetic demand needs at least two points");

  ArrivalModel model;
  model.count_std = demand.count_std;
  double total = 0.0;
  for (const Point& o : points) {
    for (const Point& d : points) {
      if (o.node == d.node) continue;
      model.od.push_back({o.node, d.node, o.origin_weight * d.destination_weight});
      total += o.origin_weight * d.destination_weight;
    }
  }
  for (OdEntry& e : model.od) e.probability /= total;
  std::sort(model.od.begin(), model.od.end(), [](const OdEntry& l, const OdEntry& r) {
    return std::tie(l.origin, l.destination) < std::tie(r.origin, r.destination);
  });

  const double centre = (horizon + 1) / 2.0;
  const double width = std::max(1e-9, demand.curve_width * horizon);
  model.rates.resize(static_cast<std::size_t>(horizon));
  for (int t = 1; t <= horizon; ++t) {
    double z = (t - centre) / width;
    model.rates[static_cast<std::size_t>(t - 1)] = demand.peak_rate * std::exp(-0.5 * z * z);
  }
  model.passenger_sizes = truncated_normal_sizes(demand.size_mean, demand.size_sd);
  model.validate();
  return model;
}

Scenario build_scenario(const ScenarioConfig& config) {
  Scenario s;
  s.limits = config.limits;
  s.horizon = config.horizon;
  s.network = build_network(config);
  s.oracle = TravelTimeOracle(s.network);

  if (!config.model_file.empty()) {
    if (!std::filesystem::exists(config.model_file)) {
      throw ConfigError(fmt::format("model file '{}' does not exist", config.model_file));
    }
    s.model = load_model(config.model_file);
    for (const OdEntry& e : s.model.od) {
      if (!s.network.valid(e.origin) || !s.network.valid(e.destination)) {
        throw ConfigError("arrival model references locations outside the network");
      }
    }
  } else {
    // Demand is drawn on the unreduced grid so that removing edges keeps it fixed.
    ScenarioConfig full = config;
    full.edge_removal = 0.0;
    s.model = synthetic_model(config.edge_removal > 0.0 ? build_network(full) : s.network, config.synthetic,
                              config.horizon, derive_seed(config.seed, 22, 0));
  }

  std::vector<int> zones = config.zone_counts;
  if (zones.empty()) {
    zones.push_back(s.network.node_count());
    for (int z : {9, 1}) {
      if (z < zones.back()) zones.push_back(z);
    }
  }
  if (config.rebalance_level >= static_cast<int>(zones.size())) {
    throw ConfigError("rebalance_level exceeds the number of aggregation levels");
  }
  try {
    s.hierarchy = build_aggregation(s.network, s.oracle, zones, derive_seed(config.seed, 23, 0));
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }

  const DeadlineRule rule = s.deadline_rule();
  for (int d = 0; d < config.history_days; ++d) {
    SamplePath day = sample_path(s.model, s.horizon, derive_seed(config.seed, 24, static_cast<std::uint64_t>(d)), rule);
    for (const auto& epoch : day.epochs) {
      for (const Request& r : epoch) ++s.pickups[r.origin];
    }
  }
  // Zones that never saw a pickup get no rebalance point.
  for (Location p : select_rebalance_points(s.hierarchy, config.rebalance_level, s.pickups)) {
    if (p >= 0 && s.pickups.count(p) > 0) s.rebalance_points.push_back(p);
  }
  return s;
}

}  // namespace ridepool
