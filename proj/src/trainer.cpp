#include "ridepool/trainer.hpp"

#include <functional>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "ridepool/road_network.hpp"
#include "text_util.hpp"

namespace ridepool {

std::map<int, double> extract_marginals(const AssignmentProblem& problem,
                                        const AssignmentSolution& solution) {
  std::map<int, double> out;
  for (std::size_t a = 0; a < problem.vehicle_counts.size(); ++a) {
    if (problem.vehicle_counts[a] > 0) out.emplace(static_cast<int>(a), solution.vehicle_duals.at(a));
  }
  return out;
}

std::vector<double> propagate(const std::vector<TransitionRecord>& records,
                              const std::map<int, double>& marginals, ValueTable& table) {
  std::vector<double> used;
  used.reserve(records.size());
  for (const TransitionRecord& r : records) {
    auto it = marginals.find(r.realized_class);
    if (it == marginals.end()) {
      throw InternalError(fmt::format("vehicle {} realized class {} without a marginal value", r.vehicle,
                                      r.realized_class));
    }
    table.update(r.previous_keys, it->second);
    used.push_back(it->second);
  }
  return used;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

using PathSource = std::function<SamplePath(int iteration, const DeadlineRule& rule)>;

TrainingResult train_paths(const TrainingConfig& config, const Environment& env, const PathSource& paths,
                           ValueTable table) {
  if (config.iterations < 1) throw ContractError("training needs at least one iteration");
  if (config.fleet_size < 1) throw ContractError("fleet size must be >= 1");
  if (env.horizon < 1) throw ContractError("horizon must be >= 1");
  if (env.oracle == nullptr || env.hierarchy == nullptr) throw ContractError("environment is incomplete");
  if (table.levels() != env.hierarchy->levels()) {
    throw ContractError("value table and aggregation hierarchy disagree on the number of levels");
  }

  const DeadlineRule rule{env.oracle, env.limits.wait_max, env.limits.delay_max, env.limits.epoch_seconds};
  TrainingResult result;
  Policy policy{PolicyKind::Adp, &table, config.rebalancing};

  for (int k = 0; k < config.iterations; ++k) {
    const int n = config.first_iteration + k;
    const auto index = static_cast<std::uint64_t>(n);
    SamplePath path = paths(n, rule);
    if (path.horizon() < env.horizon) throw ContractError("sample path is shorter than the horizon");
    SystemState state = initial_state(
        random_fleet(config.fleet_size, env.oracle->node_count(), derive_seed(config.seed, 2, index)), path);

    IterationLog log;
    log.iteration = n;
    double dual_sum = 0.0;
    long dual_count = 0;
    std::vector<std::vector<PostDecisionKey>> previous;
    for (int t = 1; t <= env.horizon; ++t) {
      std::vector<Request> arrivals = t < env.horizon ? path.at(t + 1) : std::vector<Request>{};
      StepTrace trace;
      EpochMetrics m = step(env, state, policy, std::move(arrivals), &trace);
      log.requests_seen += m.seen;
      log.requests_served += m.served;

      if (!previous.empty()) {
        std::vector<TransitionRecord> records(state.vehicles.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
          records[i].vehicle = state.vehicles[i].id;
          records[i].previous_keys = std::move(previous[i]);
          records[i].realized_class = trace.vehicle_class[i];
        }
        for (double v : propagate(records, extract_marginals(trace.problem, trace.solution), table)) {
          dual_sum += v;
          ++dual_count;
        }
      }
      previous = std::move(trace.post_keys);
    }
    log.mean_dual = dual_count > 0 ? dual_sum / static_cast<double>(dual_count) : 0.0;
    log.table_entries = table.size();
    result.log.push_back(log);
  }
  result.table = std::move(table);
  return result;
}

}  // namespace

TrainingResult train(const TrainingConfig& config, const Environment& env, const ArrivalModel& model,
                     ValueTable table) {
  return train_paths(
      config, env,
      [&](int n, const DeadlineRule& rule) {
        return sample_path(model, env.horizon, derive_seed(config.seed, 1, static_cast<std::uint64_t>(n)), rule);
      },
      std::move(table));
}

TrainingResult train(const TrainingConfig& config, const Environment& env, std::span<const SamplePath> days,
                     ValueTable table) {
  if (days.empty()) throw ContractError("training needs at least one recorded day");
  return train_paths(
      config, env,
      [&](int n, const DeadlineRule& rule) {
        return with_deadlines(days[static_cast<std::size_t>(n - 1) % days.size()], rule);
      },
      std::move(table));
}

void write_training_log(const std::vector<IterationLog>& log, std::ostream& os) {
  os << "iteration,requests_seen,requests_served,mean_dual,table_entries\n";
  for (const IterationLog& l : log) {
    os << l.iteration << ',' << l.requests_seen << ',' << l.requests_served << ',' << detail::exact(l.mean_dual)
       << ',' << l.table_entries << '\n';
  }
}

}  // namespace ridepool
