#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <compare>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "ridepool/common.hpp"
#include "ridepool/fleet.hpp"

namespace ridepool {

class AggregationHierarchy;

/// Context features attached to every post-decision key, already bucketed.
struct AuxFeatures {
  int volume_bucket = 0;
  int nearby_bucket = 0;

  friend bool operator==(const AuxFeatures&, const AuxFeatures&) = default;
};

inline constexpr int kVolumeBuckets = 5;
inline constexpr int kNearbyBuckets = 5;

/// Equal-width buckets over [0, 2 * mean_rate]; the top bucket is open.
int volume_bucket(std::size_t requests, double mean_rate);

/// 0 | 1 | 2-3 | 4-7 | 8+
int nearby_bucket(int nearby);

/// Lookup key of a post-decision vehicle at one aggregation level.
struct PostDecisionKey {
  int epoch = 0;
  int level = 0;
  int zone = 0;
  std::vector<int> dropoff_zones;  // ascending
  int onboard = 0;
  AuxFeatures aux;

  friend bool operator==(const PostDecisionKey&, const PostDecisionKey&) = default;
  friend auto operator<=>(const PostDecisionKey& l, const PostDecisionKey& r) {
    return std::tie(l.level, l.epoch, l.zone, l.dropoff_zones, l.onboard, l.aux.volume_bucket,
                    l.aux.nearby_bucket) <=> std::tie(r.level, r.epoch, r.zone, r.dropoff_zones,
                                                      r.onboard, r.aux.volume_bucket,
                                                      r.aux.nearby_bucket);
  }
};

struct PostDecisionKeyHash {
  std::size_t operator()(const PostDecisionKey& k) const noexcept;
};

/// The vehicle's zone is taken at the node it occupies or is heading to.
PostDecisionKey project(const Vehicle& vehicle, int epoch, AuxFeatures aux,
                        const AggregationHierarchy& hierarchy, int level);

/// One key per aggregation level, level 0 first.
std::vector<PostDecisionKey> project_all(const Vehicle& vehicle, int epoch, AuxFeatures aux,
                                         const AggregationHierarchy& hierarchy);

struct ValueEntry {
  double estimate = 0.0;
  double bias = 0.0;
  double variance = 0.0;  // running mean squared error
  double lambda = 0.0;
  int count = 0;

  friend bool operator==(const ValueEntry&, const ValueEntry&) = default;
};

struct BakfParams {
  double eta0 = 10.0;
  double alpha_min = 0.001;
  double prior_variation = 1.0;  // total variation assumed for entries with < 2 observations
  std::optional<double> fixed_alpha;  // testing hook: bypasses the adaptive rule
};

struct BakfResult {
  double alpha = 1.0;
  ValueEntry entry;
};

/// One adaptive smoothing step. The first observation is taken as is; the
/// next two are averaged in; afterwards the step follows the bias-adjusted
/// Kalman rule driven by the running bias and squared-error statistics.
BakfResult bakf_step(const ValueEntry& entry, double observation, const BakfParams& params);

/// Total variation of an entry's estimate: lambda * variance + bias^2.
double total_variation(const ValueEntry& entry, const BakfParams& params);

/// Normalized inverse-total-variation weights, one per level. Missing entries
/// use the prior.
Eigen::VectorXd compute_weights(std::span<const ValueEntry* const> entries, const BakfParams& params);

class ValueTable {
 public:
  ValueTable() = default;
  explicit ValueTable(int levels, BakfParams params = {});

  int levels() const { return static_cast<int>(tables_.size()); }
  const BakfParams& params() const { return params_; }
  void set_params(const BakfParams& params) { params_ = params; }

  /// Entry for a key, or nullptr when never visited.
  const ValueEntry* find(const PostDecisionKey& key) const;

  /// Blended estimate over the keys of one post-decision vehicle (one per level).
  double estimate(std::span<const PostDecisionKey> keys) const;

  /// Smooths `observation` into every level's entry. Returns the step sizes.
  std::vector<double> update(std::span<const PostDecisionKey> keys, double observation);

  std::size_t size(int level) const;
  std::size_t size() const;

  void write(std::ostream& os) const;
  friend bool operator==(const ValueTable& l, const ValueTable& r) { return l.tables_ == r.tables_; }

 private:
  friend ValueTable read_value_table(std::istream& is, const BakfParams& params);
  using Level = std::unordered_map<PostDecisionKey, ValueEntry, PostDecisionKeyHash>;
  std::vector<Level> tables_;
  BakfParams params_;
};

/// Text format, one entry per line, `#levels=G` header:
/// `t|g|zone,onboard,volume,nearby,dropoffs|estimate|bias|variance|lambda|n`
/// where dropoffs is `-` or zone ids joined by `;`.
ValueTable read_value_table(std::istream& is, const BakfParams& params = {});
ValueTable load_value_table(const std::string& path, const BakfParams& params = {});
void save_value_table(const ValueTable& table, const std::string& path);

}  // namespace ridepool
