#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ridepool/common.hpp"

namespace ridepool {

class TravelTimeOracle;

/// A passenger group: origin, destination, size, absolute drop-off deadline and
/// whether it has been picked up.
struct Request {
  RequestId id = 0;
  Location origin = 0;
  Location destination = 0;
  int passengers = 1;
  Seconds deadline = 0;
  bool picked_up = false;
  int arrival_epoch = 1;

  friend bool operator==(const Request&, const Request&) = default;
};

/// Deadline fixed at the start of the arrival epoch. Wait time that goes
/// unused before pickup remains available for the drop-off.
constexpr Seconds compute_deadline(Seconds epoch_start_seconds, Seconds wait_max, Seconds travel,
                                   Seconds delay_max) {
  return epoch_start_seconds + wait_max + travel + delay_max;
}

/// What a request-producing step needs to stamp deadlines.
struct DeadlineRule {
  const TravelTimeOracle* oracle = nullptr;
  Seconds wait_max = 90;
  Seconds delay_max = 90;
  Seconds epoch_seconds = 60;

  Seconds deadline(const Request& r) const;
};

struct OdEntry {
  Location origin = 0;
  Location destination = 0;
  double probability = 0.0;

  friend bool operator==(const OdEntry&, const OdEntry&) = default;
};

/// Exogenous arrival process: per-epoch mean counts, a Gaussian band around
/// them, an origin-destination table and a passenger-size table over {1..4}.
struct ArrivalModel {
  std::vector<double> rates;  // index t-1
  double count_std = 1.0;
  std::vector<OdEntry> od;
  std::array<double, 4> passenger_sizes{1.0, 0.0, 0.0, 0.0};

  int horizon() const { return static_cast<int>(rates.size()); }
  double mean_rate() const;

  /// Throws ValidationError on negative rates or tables that do not sum to 1.
  void validate() const;

  friend bool operator==(const ArrivalModel&, const ArrivalModel&) = default;
};

/// One realization of the arrival process; epochs[t-1] holds the requests
/// that arrived in epoch t.
struct SamplePath {
  std::vector<std::vector<Request>> epochs;

  int horizon() const { return static_cast<int>(epochs.size()); }
  const std::vector<Request>& at(int epoch) const {
    return epochs[static_cast<std::size_t>(epoch - 1)];
  }
  std::size_t total() const;

  friend bool operator==(const SamplePath&, const SamplePath&) = default;
};

/// CSV rows `epoch,origin,destination,passengers[,id]` with an optional header.
/// Ids default to the row order. Deadlines come from `rule`.
SamplePath read_requests_csv(std::istream& is, int horizon, int node_count, const DeadlineRule& rule);
SamplePath load_requests_csv(const std::string& path, int horizon, int node_count,
                             const DeadlineRule& rule);
void write_requests_csv(const SamplePath& path, std::ostream& os);
void save_requests_csv(const SamplePath& path, const std::string& file);

/// Recomputes every deadline with `rule` (e.g. for a different wait/delay).
SamplePath with_deadlines(SamplePath path, const DeadlineRule& rule);

/// Per epoch: count ~ round-half-up of a Normal(rate, count_std) draw
/// truncated to [0, inf) (zero when the rate is zero), then an independent OD
/// pair and passenger size per request. Deterministic in `seed`.
SamplePath sample_path(const ArrivalModel& model, int horizon, std::uint64_t seed,
                       const DeadlineRule& rule);

/// Per-epoch mean counts over the given days plus empirical OD and size
/// frequencies. Throws ValidationError on empty input.
ArrivalModel fit_arrival_model(std::span<const SamplePath> days);

void write_model(const ArrivalModel& model, std::ostream& os);
ArrivalModel read_model(std::istream& is);
void save_model(const ArrivalModel& model, const std::string& path);
ArrivalModel load_model(const std::string& path);

}  // namespace ridepool
