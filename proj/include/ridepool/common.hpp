#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ridepool {

/// Whole seconds. Every time quantity in the library is integral.
using Seconds = std::int64_t;

/// Dense 0-based intersection index.
using Location = std::int32_t;

using RequestId = std::int64_t;
using VehicleId = std::int32_t;

/// Malformed input text (network, request, model or table files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that parses but violates a structural invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition on a library call.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Internal inconsistency. Seeing one of these means there is a bug.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Per-scenario service limits shared by routing, matching and simulation.
struct Limits {
  Seconds wait_max = 90;
  Seconds delay_max = 90;
  int groups_max = 3;
  int capacity_max = 6;
  Seconds epoch_seconds = 60;
};

/// Absolute start of 1-based epoch t.
constexpr Seconds epoch_start(int epoch, Seconds epoch_seconds) {
  return static_cast<Seconds>(epoch - 1) * epoch_seconds;
}

}  // namespace ridepool
