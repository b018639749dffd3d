#pragma once

// Batch kernels for offline work (Monte Carlo error studies, band sweeps,
// recorded-session analysis). Each kernel has a serial reference and an
// OpenMP version; tests hold them equal and bench/ compares their speed.

#include "rehab/constraints.hpp"
#include "rehab/feedback.hpp"
#include "rehab/kinematics.hpp"

#include <span>
#include <vector>

namespace rehab::kernels {

struct BatchAngle {
  double theta_deg = 0.0;
  MeasureStatus status = MeasureStatus::Ok;

  friend bool operator==(const BatchAngle&, const BatchAngle&) = default;
};

std::vector<BatchAngle> measure_batch_serial(std::span<const PoseFrame> frames, const JointDef& def,
                                             double visibility_floor = 0.5);
std::vector<BatchAngle> measure_batch_parallel(std::span<const PoseFrame> frames, const JointDef& def,
                                               double visibility_floor = 0.5);

std::vector<KinematicState> classify_batch_serial(std::span<const double> thetas, const Constraint& c,
                                                  const FeedbackConfig& cfg);
std::vector<KinematicState> classify_batch_parallel(std::span<const double> thetas, const Constraint& c,
                                                    const FeedbackConfig& cfg);

// |measured - commanded| for every Ok measurement.
std::vector<double> abs_errors_serial(std::span<const BatchAngle> measured, std::span<const double> commanded);
std::vector<double> abs_errors_parallel(std::span<const BatchAngle> measured, std::span<const double> commanded);

int max_threads();

}  // namespace rehab::kernels
