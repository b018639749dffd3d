#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <string>

namespace rehab {

// Integral values serialize as integers ("max_angle":90, not 90.0) so the
// canonical form matches hand-written documents.
inline nlohmann::json json_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 9.0e15) {
    return static_cast<std::int64_t>(v);
  }
  return v;
}

inline std::string json_number_text(double v) { return json_number(v).dump(); }

}  // namespace rehab
