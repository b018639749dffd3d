#pragma once

// Independent reference computations. Nothing here calls into the engine's
// math; the tests compare the engine against these.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace oracle {

// Angle from side lengths (law of cosines), not from a dot product.
inline double angle_deg(std::array<double, 3> a, std::array<double, 3> b) {
  auto len = [](std::array<double, 3> v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); };
  const double la = len(a);
  const double lb = len(b);
  const double lc = len({a[0] - b[0], a[1] - b[1], a[2] - b[2]});
  const double c = std::clamp((la * la + lb * lb - lc * lc) / (2.0 * la * lb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

inline double dot(std::array<double, 3> a, std::array<double, 3> b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// theta(t) of the synthetic repetition.
inline double theta(double peak, double period_ms, double t_ms) {
  return peak * (1.0 - std::cos(2.0 * std::numbers::pi * t_ms / period_ms)) / 2.0;
}

inline double dtheta_deg_s(double peak, double period_ms, double t_ms) {
  return peak * (std::numbers::pi / period_ms) * std::sin(2.0 * std::numbers::pi * t_ms / period_ms) * 1000.0;
}

// Band decision with the default widths, by string name.
inline std::string band(double theta, double a_max, double delta = 5.0, double optimal = 10.0, double under = 15.0) {
  if (theta > a_max + delta) return "CriticalViolation";
  if (a_max - optimal <= theta) return "Optimal";
  if (a_max - under <= theta) return "Approaching";
  return "UnderExtension";
}

// Precedence written out as a list, highest first.
inline const std::vector<std::string>& precedence() {
  static const std::vector<std::string> p = {"CriticalViolation", "SpatialViolation", "HighVelocity",
                                             "UnderExtension",    "Optimal",          "Approaching",
                                             "NoData"};
  return p;
}

inline std::string winner(const std::vector<std::string>& present) {
  for (const auto& s : precedence()) {
    if (std::find(present.begin(), present.end(), s) != present.end()) return s;
  }
  return "NoData";
}

}  // namespace oracle
