#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <string>

namespace basinscope {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_shortest(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf.data(), end);
}

/// Nine significant digits, the precision used for every numeric output column.
inline std::string format_sig9(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.9g", v);
  std::string s(buf.data());
  if (s == "-0") s = "0";
  return s;
}

}  // namespace basinscope
