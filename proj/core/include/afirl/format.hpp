#pragma once

#include <string>

namespace afirl {

/// Shortest decimal text that round-trips the value ("0", "1", "-0.01", ...).
std::string formatNumber(double value);

}  // namespace afirl
