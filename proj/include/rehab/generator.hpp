#pragma once

#include "rehab/kinematics.hpp"
#include "rehab/landmark.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace rehab {

// Synthetic repetition: theta(t) = peak * (1 - cos(2*pi*t/period)) / 2.
struct TrajectorySpec {
  JointDef joint = default_joint();
  double peak_angle_deg = 90.0;
  double period_ms = 4000.0;
  int repetitions = 1;
  double fps = 30.0;
  double noise_sigma = 0.0;  // Gaussian landmark jitter, normalized units
  std::uint64_t seed = 0;
  // Hold a constant angle instead of the cosine ramp.
  std::optional<double> hold_angle_deg;
  // Overrides repetitions * period when set.
  std::optional<std::size_t> frame_count;
  std::uint64_t first_frame_id = 0;

  static JointDef default_joint();  // left shoulder abduction
  // Throws std::invalid_argument.
  void check() const;
};

double commanded_angle(const TrajectorySpec& spec, double t_ms);

// Resting full-body pose facing the camera; body length 0.25.
PoseFrame neutral_pose();

// Neutral pose with def's vertex at (0.5,0.4,0), ray_b 0.3 below it and
// ray_a on a 0.25-radius arc so that measure_joint(def) reads theta_deg.
PoseFrame pose_at_angle(const JointDef& def, double theta_deg);

class TrajectoryGenerator {
public:
  explicit TrajectoryGenerator(TrajectorySpec spec);

  std::size_t frame_count() const { return count_; }
  bool done() const { return next_ >= count_; }
  std::int64_t t_ms_of(std::size_t k) const;
  PoseFrame next();

private:
  TrajectorySpec spec_;
  std::size_t count_ = 0;
  std::size_t next_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;
};

std::vector<PoseFrame> generate(const TrajectorySpec& spec);

}  // namespace rehab
