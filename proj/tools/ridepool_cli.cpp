#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ridepool/experiment.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Options {
  std::string config;
  std::vector<std::string> settings;
  std::string output;
};

void add_common(CLI::App* cmd, Options& opts) {
  cmd->add_option("-c,--config", opts.config, "scenario config file (key = value lines)");
  cmd->add_option("-s,--set", opts.settings, "override a config key, e.g. -s wait_delay=60 -s sweep.groups_max=1,2,3")
      ->take_all();
  cmd->add_option("-o,--output", opts.output, "output directory (same as -s output_dir=...)");
}

ridepool::ScenarioConfig resolve(const Options& opts) {
  ridepool::ScenarioConfig config = opts.config.empty() ? ridepool::ScenarioConfig{} : ridepool::load_config(opts.config);
  for (const std::string& s : opts.settings) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ridepool::ConfigError(fmt::format("override '{}' is not key=value", s));
    ridepool::apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!opts.output.empty()) config.output_dir = opts.output;
  return config;
}

void print_rows(const std::vector<ridepool::SummaryRow>& rows) { ridepool::write_summary_csv(rows, std::cout); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ride-pooling dispatch with approximate dynamic programming"};
  app.require_subcommand(1);
  Options opts;
  bool print_config = false;

  auto* generate = app.add_subcommand("generate", "write network, arrival model and replicate request files");
  auto* train = app.add_subcommand("train", "train a value table and write the training log");
  auto* evaluate = app.add_subcommand("evaluate", "run the configured policies over the replicates");
  auto* sweep = app.add_subcommand("sweep", "train and evaluate every point of the sweep axes");
  for (auto* cmd : {generate, train, evaluate, sweep}) {
    add_common(cmd, opts);
    cmd->add_flag("--print-config", print_config, "print the resolved configuration and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  ridepool::ScenarioConfig config;
  try {
    config = resolve(opts);
  } catch (const ridepool::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  if (print_config) {
    ridepool::write_config(config, std::cout);
    return 0;
  }

  try {
    if (generate->parsed()) {
      ridepool::cmd_generate(config);
    } else if (train->parsed()) {
      auto result = ridepool::cmd_train(config);
      const auto& last = result.log.back();
      std::cout << fmt::format("trained {} iterations; last: seen {} served {} entries {}\n", result.log.size(),
                               last.requests_seen, last.requests_served, last.table_entries);
    } else if (evaluate->parsed()) {
      print_rows(ridepool::cmd_evaluate(config));
    } else if (sweep->parsed()) {
      print_rows(ridepool::cmd_sweep(config));
    }
  } catch (const ridepool::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ridepool::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ridepool::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
