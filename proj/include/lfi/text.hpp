#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "lfi/numeric.hpp"

namespace lfi {

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string join_doubles(const Eigen::Ref<const Vector>& v, std::string_view sep = ",") {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_double(v[i]);
  }
  return out;
}

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);
/// Parses a full token as a double; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);
/// Comma-separated doubles; throws InvalidArgument naming `what` on failure.
Vector parse_vector(std::string_view text, const std::string& what);

}  // namespace lfi
