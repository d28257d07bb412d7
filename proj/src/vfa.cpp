#include "ridepool/vfa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ridepool/road_network.hpp"
#include "text_util.hpp"

namespace ridepool {

int volume_bucket(std::size_t requests, double mean_rate) {
  if (!(mean_rate > 0.0)) return 0;
  const double width = 2.0 * mean_rate / kVolumeBuckets;
  auto b = static_cast<int>(std::floor(static_cast<double>(requests) / width));
  return std::clamp(b, 0, kVolumeBuckets - 1);
}

int nearby_bucket(int nearby) {
  if (nearby <= 0) return 0;
  if (nearby == 1) return 1;
  if (nearby <= 3) return 2;
  if (nearby <= 7) return 3;
  return 4;
}

std::size_t PostDecisionKeyHash::operator()(const PostDecisionKey& k) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::int64_t v) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  mix(k.epoch);
  mix(k.level);
  mix(k.zone);
  mix(k.onboard);
  mix(k.aux.volume_bucket);
  mix(k.aux.nearby_bucket);
  for (int z : k.dropoff_zones) mix(z);
  mix(static_cast<std::int64_t>(k.dropoff_zones.size()));
  return static_cast<std::size_t>(h);
}

PostDecisionKey project(const Vehicle& vehicle, int epoch, AuxFeatures aux,
                        const AggregationHierarchy& hierarchy, int level) {
  PostDecisionKey key;
  key.epoch = epoch;
  key.level = level;
  key.zone = hierarchy.zone(level, vehicle.anchor());
  key.dropoff_zones.reserve(vehicle.assigned.size());
  for (const Request& r : vehicle.assigned) key.dropoff_zones.push_back(hierarchy.zone(level, r.destination));
  std::sort(key.dropoff_zones.begin(), key.dropoff_zones.end());
  key.onboard = vehicle.load();
  key.aux = aux;
  return key;
}

std::vector<PostDecisionKey> project_all(const Vehicle& vehicle, int epoch, AuxFeatures aux,
                                         const AggregationHierarchy& hierarchy) {
  std::vector<PostDecisionKey> keys;
  keys.reserve(static_cast<std::size_t>(hierarchy.levels()));
  for (int g = 0; g < hierarchy.levels(); ++g) keys.push_back(project(vehicle, epoch, aux, hierarchy, g));
  return keys;
}

BakfResult bakf_step(const ValueEntry& entry, double observation, const BakfParams& params) {
  if (!std::isfinite(observation)) throw ContractError("value observations must be finite");
  BakfResult out;
  ValueEntry& e = out.entry;
  e = entry;
  const int n = entry.count + 1;
  double alpha = 1.0;
  if (entry.count == 0) {
    e.bias = 0.0;
    e.variance = 0.0;
  } else {
    const double err = observation - entry.estimate;
    const double eta = params.eta0 / (params.eta0 + entry.count - 1);
    e.bias = (1.0 - eta) * entry.bias + eta * err;
    e.variance = (1.0 - eta) * entry.variance + eta * err * err;
    if (n <= 3) {
      alpha = 1.0 / n;
    } else if (e.variance <= 1e-300) {
      alpha = params.alpha_min;
    } else {
      const double sigma2 = (e.variance - e.bias * e.bias) / (1.0 + entry.lambda);
      alpha = std::clamp(1.0 - sigma2 / e.variance, params.alpha_min, 1.0);
    }
  }
  if (params.fixed_alpha) alpha = *params.fixed_alpha;
  e.estimate = entry.count == 0 && !params.fixed_alpha ? observation
                                                       : (1.0 - alpha) * entry.estimate + alpha * observation;
  e.lambda = entry.count == 0 ? alpha * alpha : (1.0 - alpha) * (1.0 - alpha) * entry.lambda + alpha * alpha;
  e.count = n;
  out.alpha = alpha;
  return out;
}

double total_variation(const ValueEntry& entry, const BakfParams& params) {
  constexpr double kFloor = 1e-8;
  if (entry.count < 2) return params.prior_variation;
  return std::max(kFloor, entry.lambda * entry.variance + entry.bias * entry.bias);
}

Eigen::VectorXd compute_weights(std::span<const ValueEntry* const> entries, const BakfParams& params) {
  if (entries.empty()) throw ContractError("weights need at least one level");
  Eigen::VectorXd w(static_cast<Eigen::Index>(entries.size()));
  for (std::size_t g = 0; g < entries.size(); ++g) {
    const ValueEntry empty;
    const ValueEntry& e = entries[g] != nullptr ? *entries[g] : empty;
    w(static_cast<Eigen::Index>(g)) = 1.0 / total_variation(e, params);
  }
  return w / w.sum();
}

ValueTable::ValueTable(int levels, BakfParams params)
    : tables_(static_cast<std::size_t>(levels)), params_(params) {
  if (levels < 1) throw ContractError("a value table needs at least one level");
}

const ValueEntry* ValueTable::find(const PostDecisionKey& key) const {
  const Level& level = tables_.at(static_cast<std::size_t>(key.level));
  auto it = level.find(key);
  return it == level.end() ? nullptr : &it->second;
}

double ValueTable::estimate(std::span<const PostDecisionKey> keys) const {
  if (keys.size() == 1) {
    const ValueEntry* e = find(keys[0]);
    return e != nullptr ? e->estimate : 0.0;
  }
  std::vector<const ValueEntry*> entries(keys.size());
  Eigen::VectorXd values(static_cast<Eigen::Index>(keys.size()));
  for (std::size_t g = 0; g < keys.size(); ++g) {
    entries[g] = find(keys[g]);
    values(static_cast<Eigen::Index>(g)) = entries[g] != nullptr ? entries[g]->estimate : 0.0;
  }
  return compute_weights(entries, params_).dot(values);
}

std::vector<double> ValueTable::update(std::span<const PostDecisionKey> keys, double observation) {
  std::vector<double> alphas;
  alphas.reserve(keys.size());
  for (const PostDecisionKey& key : keys) {
    ValueEntry& entry = tables_.at(static_cast<std::size_t>(key.level))[key];
    BakfResult step = bakf_step(entry, observation, params_);
    entry = step.entry;
    alphas.push_back(step.alpha);
  }
  return alphas;
}

std::size_t ValueTable::size(int level) const { return tables_.at(static_cast<std::size_t>(level)).size(); }

std::size_t ValueTable::size() const {
  std::size_t n = 0;
  for (const Level& l : tables_) n += l.size();
  return n;
}

void ValueTable::write(std::ostream& os) const {
  os << "#levels=" << tables_.size() << '\n';
  for (const Level& level : tables_) {
    std::vector<const std::pair<const PostDecisionKey, ValueEntry>*> sorted;
    sorted.reserve(level.size());
    for (const auto& kv : level) sorted.push_back(&kv);
    std::sort(sorted.begin(), sorted.end(), [](auto* l, auto* r) { return l->first < r->first; });
    for (const auto* kv : sorted) {
      const PostDecisionKey& k = kv->first;
      const ValueEntry& e = kv->second;
      std::string drops = "-";
      if (!k.dropoff_zones.empty()) drops = fmt::format("{}", fmt::join(k.dropoff_zones, ";"));
      os << k.epoch << '|' << k.level << '|' << k.zone << ',' << k.onboard << ',' << k.aux.volume_bucket
         << ',' << k.aux.nearby_bucket << ',' << drops << '|' << detail::exact(e.estimate) << '|'
         << detail::exact(e.bias) << '|' << detail::exact(e.variance) << '|' << detail::exact(e.lambda)
         << '|' << e.count << '\n';
    }
  }
}

ValueTable read_value_table(std::istream& is, const BakfParams& params) {
  std::string line;
  std::size_t line_no = 0;
  ValueTable table;
  table.params_ = params;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (view.starts_with("#levels=")) {
        auto levels = detail::parse_int(view.substr(8), line_no);
        if (levels < 1) throw ParseError(fmt::format("line {}: levels must be >= 1", line_no));
        table.tables_.assign(static_cast<std::size_t>(levels), {});
        have_header = true;
      }
      continue;
    }
    if (!have_header) throw ParseError("value table is missing the #levels= header");
    auto f = detail::split(view, '|');
    if (f.size() != 8) throw ParseError(fmt::format("line {}: expected 8 '|' separated fields", line_no));
    PostDecisionKey k;
    k.epoch = static_cast<int>(detail::parse_int(f[0], line_no));
    k.level = static_cast<int>(detail::parse_int(f[1], line_no));
    if (k.level < 0 || k.level >= table.levels()) {
      throw ParseError(fmt::format("line {}: level {} outside the table", line_no, k.level));
    }
    auto kf = detail::split(f[2], ',');
    if (kf.size() != 5) throw ParseError(fmt::format("line {}: key needs 5 fields", line_no));
    k.zone = static_cast<int>(detail::parse_int(kf[0], line_no));
    k.onboard = static_cast<int>(detail::parse_int(kf[1], line_no));
    k.aux.volume_bucket = static_cast<int>(detail::parse_int(kf[2], line_no));
    k.aux.nearby_bucket = static_cast<int>(detail::parse_int(kf[3], line_no));
    if (kf[4] != "-") {
      for (auto z : detail::split(kf[4], ';')) k.dropoff_zones.push_back(static_cast<int>(detail::parse_int(z, line_no)));
      if (!std::is_sorted(k.dropoff_zones.begin(), k.dropoff_zones.end())) {
        throw ParseError(fmt::format("line {}: drop-off zones must be ascending", line_no));
      }
    }
    ValueEntry e;
    e.estimate = detail::parse_double(f[3], line_no);
    e.bias = detail::parse_double(f[4], line_no);
    e.variance = detail::parse_double(f[5], line_no);
    e.lambda = detail::parse_double(f[6], line_no);
    e.count = static_cast<int>(detail::parse_int(f[7], line_no));
    if (e.count < 0 || !std::isfinite(e.estimate)) {
      throw ParseError(fmt::format("line {}: invalid entry statistics", line_no));
    }
    auto& level = table.tables_[static_cast<std::size_t>(k.level)];
    if (!level.emplace(std::move(k), e).second) throw ParseError(fmt::format("line {}: duplicate key", line_no));
  }
  if (!have_header) throw ParseError("value table is missing the #levels= header");
  return table;
}

ValueTable load_value_table(const std::string& path, const BakfParams& params) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open value table '{}'", path));
  return read_value_table(in, params);
}

void save_value_table(const ValueTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  table.write(out);
}

}  // namespace ridepool
