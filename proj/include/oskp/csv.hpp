#pragma once

/** Number formatting shared by the CSV writers. */

#include <cstdio>
#include <string>

namespace oskp {

/// Locale-independent decimal form, 10 significant digits.
inline std::string csv_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", value);
  return std::string(buf);
}

}  // namespace oskp
