#include "afirl/format.hpp"

#include <array>
#include <charconv>

namespace afirl {

std::string formatNumber(double value) {
  std::array<char, 32> buffer{};
  const auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buffer.data(), end);
}

}  // namespace afirl
