#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string>

namespace evontree {

// Shortest round-trip decimal form; "inf"/"-inf"/"nan" for non-finite.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; }

}  // namespace evontree
