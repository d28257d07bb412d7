#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "ridepool/common.hpp"

namespace ridepool::detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool is_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

/// Strict integer parse; fractional or trailing text is a ParseError.
inline std::int64_t parse_int(std::string_view s, std::size_t line_no) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(fmt::format("line {}: expected an integer, got '{}'", line_no, s));
  }
  return v;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  s = trim(s);
  std::string copy(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(copy, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (copy.empty() || used != copy.size()) {
    throw ParseError(fmt::format("line {}: expected a number, got '{}'", line_no, s));
  }
  return v;
}

/// Shortest text that reads back to the same double.
inline std::string exact(double v) { return fmt::format("{}", v); }

}  // namespace ridepool::detail
