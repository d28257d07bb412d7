#include "ridepool/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "ridepool/road_network.hpp"
#include "text_util.hpp"

namespace ridepool {

Seconds DeadlineRule::deadline(const Request& r) const {
  if (oracle == nullptr) throw ContractError("deadline rule has no travel-time oracle");
  return compute_deadline(epoch_start(r.arrival_epoch, epoch_seconds), wait_max,
                          oracle->travel_time(r.origin, r.destination), delay_max);
}

double ArrivalModel::mean_rate() const {
  if (rates.empty()) return 0.0;
  return std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
}

void ArrivalModel::validate() const {
  constexpr double kTol = 1e-6;
  for (double r : rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("arrival rates must be finite and >= 0");
  }
  if (!(count_std >= 0.0)) throw ValidationError("count_std must be >= 0");
  double od_sum = 0.0;
  for (const OdEntry& e : od) {
    if (!(e.probability >= 0.0)) throw ValidationError("OD probabilities must be >= 0");
    if (e.origin == e.destination) throw ValidationError("OD entry with origin == destination");
    od_sum += e.probability;
  }
  bool any_rate = std::any_of(rates.begin(), rates.end(), [](double r) { return r > 0.0; });
  if ((any_rate || !od.empty()) && std::abs(od_sum - 1.0) > kTol) {
    throw ValidationError(fmt::format("OD probabilities sum to {} instead of 1", od_sum));
  }
  double size_sum = 0.0;
  for (double p : passenger_sizes) {
    if (!(p >= 0.0)) throw ValidationError("passenger-size probabilities must be >= 0");
    size_sum += p;
  }
  if (std::abs(size_sum - 1.0) > kTol) {
    throw ValidationError(fmt::format("passenger-size probabilities sum to {} instead of 1", size_sum));
  }
}

std::size_t SamplePath::total() const {
  std::size_t n = 0;
  for (const auto& e : epochs) n += e.size();
  return n;
}

SamplePath read_requests_csv(std::istream& is, int horizon, int node_count, const DeadlineRule& rule) {
  SamplePath path;
  path.epochs.resize(static_cast<std::size_t>(horizon));
  std::set<RequestId> ids;
  std::string line;
  std::size_t line_no = 0;
  RequestId next_id = 0;
  bool first_data = true;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = detail::split(view, ',');
    if (first_data && !detail::is_int(fields[0])) {
      first_data = false;  // header
      continue;
    }
    first_data = false;
    if (fields.size() != 4 && fields.size() != 5) {
      throw ParseError(fmt::format("line {}: expected epoch,origin,destination,passengers[,id]", line_no));
    }
    Request r;
    r.arrival_epoch = static_cast<int>(detail::parse_int(fields[0], line_no));
    r.origin = static_cast<Location>(detail::parse_int(fields[1], line_no));
    r.destination = static_cast<Location>(detail::parse_int(fields[2], line_no));
    r.passengers = static_cast<int>(detail::parse_int(fields[3], line_no));
    r.id = fields.size() == 5 ? detail::parse_int(fields[4], line_no) : next_id;
    ++next_id;
    if (r.arrival_epoch < 1 || r.arrival_epoch > horizon) {
      throw ParseError(fmt::format("line {}: epoch {} outside 1..{}", line_no, r.arrival_epoch, horizon));
    }
    if (r.origin < 0 || r.origin >= node_count || r.destination < 0 || r.destination >= node_count) {
      throw ParseError(fmt::format("line {}: unknown location", line_no));
    }
    if (r.origin == r.destination) {
      throw ParseError(fmt::format("line {}: origin equals destination", line_no));
    }
    if (r.passengers < 1) throw ParseError(fmt::format("line {}: passengers must be >= 1", line_no));
    if (!ids.insert(r.id).second) throw ParseError(fmt::format("line {}: duplicate id {}", line_no, r.id));
    r.deadline = rule.deadline(r);
    path.epochs[static_cast<std::size_t>(r.arrival_epoch - 1)].push_back(r);
  }
  return path;
}

SamplePath load_requests_csv(const std::string& file, int horizon, int node_count,
                             const DeadlineRule& rule) {
  std::ifstream in(file);
  if (!in) throw ParseError(fmt::format("cannot open request file '{}'", file));
  return read_requests_csv(in, horizon, node_count, rule);
}

void write_requests_csv(const SamplePath& path, std::ostream& os) {
  os << "epoch,origin,destination,passengers,id\n";
  for (const auto& epoch : path.epochs) {
    for (const Request& r : epoch) {
      os << r.arrival_epoch << ',' << r.origin << ',' << r.destination << ',' << r.passengers << ','
         << r.id << '\n';
    }
  }
}

void save_requests_csv(const SamplePath& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file));
  write_requests_csv(path, out);
}

SamplePath with_deadlines(SamplePath path, const DeadlineRule& rule) {
  for (auto& epoch : path.epochs) {
    for (Request& r : epoch) r.deadline = rule.deadline(r);
  }
  return path;
}

SamplePath sample_path(const ArrivalModel& model, int horizon, std::uint64_t seed,
                       const DeadlineRule& rule) {
  model.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> od_weights;
  od_weights.reserve(model.od.size());
  for (const OdEntry& e : model.od) od_weights.push_back(e.probability);
  std::discrete_distribution<std::size_t> pick_od(od_weights.begin(), od_weights.end());
  std::discrete_distribution<int> pick_size(model.passenger_sizes.begin(), model.passenger_sizes.end());

  SamplePath path;
  path.epochs.resize(static_cast<std::size_t>(horizon));
  RequestId next_id = 0;
  for (int t = 1; t <= horizon; ++t) {
    double rate = t <= model.horizon() ? model.rates[static_cast<std::size_t>(t - 1)] : 0.0;
    if (rate <= 0.0 || model.od.empty()) continue;
    double draw = rate;
    if (model.count_std > 0.0) {
      do {
        draw = rate + model.count_std * noise(rng);
      } while (draw < 0.0);
    }
    auto count = static_cast<std::int64_t>(std::floor(draw + 0.5));
    auto& bucket = path.epochs[static_cast<std::size_t>(t - 1)];
    for (std::int64_t k = 0; k < count; ++k) {
      const OdEntry& e = model.od[pick_od(rng)];
      Request r;
      r.id = next_id++;
      r.origin = e.origin;
      r.destination = e.destination;
      r.passengers = pick_size(rng) + 1;
      r.arrival_epoch = t;
      r.deadline = rule.oracle != nullptr ? rule.deadline(r) : 0;
      bucket.push_back(r);
    }
  }
  return path;
}

ArrivalModel fit_arrival_model(std::span<const SamplePath> days) {
  if (days.empty()) throw ValidationError("cannot fit an arrival model to zero days");
  int horizon = 0;
  for (const SamplePath& d : days) horizon = std::max(horizon, d.horizon());
  ArrivalModel model;
  model.rates.assign(static_cast<std::size_t>(horizon), 0.0);
  std::map<std::pair<Location, Location>, std::int64_t> od_counts;
  std::array<std::int64_t, 4> size_counts{};
  std::int64_t total = 0;
  for (const SamplePath& day : days) {
    for (int t = 1; t <= day.horizon(); ++t) {
      model.rates[static_cast<std::size_t>(t - 1)] += static_cast<double>(day.at(t).size());
      for (const Request& r : day.at(t)) {
        if (r.passengers < 1 || r.passengers > 4) {
          throw ValidationError(fmt::format("request {} has {} passengers; sizes must be 1..4", r.id,
                                            r.passengers));
        }
        ++od_counts[{r.origin, r.destination}];
        ++size_counts[static_cast<std::size_t>(r.passengers - 1)];
        ++total;
      }
    }
  }
  if (total == 0) throw ValidationError("cannot fit an arrival model to days without requests");
  for (double& r : model.rates) r /= static_cast<double>(days.size());
  for (const auto& [key, count] : od_counts) {
    model.od.push_back({key.first, key.second, static_cast<double>(count) / static_cast<double>(total)});
  }
  for (std::size_t i = 0; i < 4; ++i) {
    model.passenger_sizes[i] = static_cast<double>(size_counts[i]) / static_cast<double>(total);
  }
  return model;
}

void write_model(const ArrivalModel& model, std::ostream& os) {
  os << "# arrival model\n";
  os << "horizon " << model.horizon() << '\n';
  os << "count_std " << detail::exact(model.count_std) << '\n';
  os << "rates";
  for (double r : model.rates) os << ' ' << detail::exact(r);
  os << "\nsizes";
  for (double p : model.passenger_sizes) os << ' ' << detail::exact(p);
  os << '\n';
  for (const OdEntry& e : model.od) {
    os << "od " << e.origin << ' ' << e.destination << ' ' << detail::exact(e.probability) << '\n';
  }
}

ArrivalModel read_model(std::istream& is) {
  ArrivalModel model;
  std::string line;
  std::size_t line_no = 0;
  int horizon = -1;
  bool have_sizes = false;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::istringstream in{std::string(view)};
    std::string key;
    in >> key;
    std::vector<std::string> values;
    for (std::string v; in >> v;) values.push_back(v);
    auto need = [&](std::size_t n) {
      if (values.size() != n) throw ParseError(fmt::format("line {}: '{}' expects {} values", line_no, key, n));
    };
    if (key == "horizon") {
      need(1);
      horizon = static_cast<int>(detail::parse_int(values[0], line_no));
    } else if (key == "count_std") {
      need(1);
      model.count_std = detail::parse_double(values[0], line_no);
    } else if (key == "rates") {
      model.rates.clear();
      for (const auto& v : values) model.rates.push_back(detail::parse_double(v, line_no));
    } else if (key == "sizes") {
      need(4);
      for (std::size_t i = 0; i < 4; ++i) model.passenger_sizes[i] = detail::parse_double(values[i], line_no);
      have_sizes = true;
    } else if (key == "od") {
      need(3);
      model.od.push_back({static_cast<Location>(detail::parse_int(values[0], line_no)),
                          static_cast<Location>(detail::parse_int(values[1], line_no)),
                          detail::parse_double(values[2], line_no)});
    } else {
      throw ParseError(fmt::format("line {}: unknown key '{}'", line_no, key));
    }
  }
  if (horizon >= 0 && horizon != model.horizon()) {
    throw ParseError(fmt::format("model declares horizon {} but lists {} rates", horizon, model.horizon()));
  }
  if (!have_sizes) throw ParseError("model is missing the sizes line");
  model.validate();
  return model;
}

void save_model(const ArrivalModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  write_model(model, out);
}

ArrivalModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open model file '{}'", path));
  return read_model(in);
}

}  // namespace ridepool
