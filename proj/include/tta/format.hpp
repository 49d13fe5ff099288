#pragma once

#include <array>
#include <charconv>
#include <string>

namespace tta {

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

}  // namespace tta
