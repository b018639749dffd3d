#include "rehab/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <omp.h>

namespace rehab::kernels {

std::vector<BatchAngle> measure_batch_serial(std::span<const PoseFrame> frames, const JointDef& def,
                                             double visibility_floor) {
  std::vector<BatchAngle> out(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto r = try_measure_joint(frames[i], def, visibility_floor);
    out[i] = {r.status == MeasureStatus::Ok ? r.theta_deg : 0.0, r.status};
  }
  return out;
}

std::vector<BatchAngle> measure_batch_parallel(std::span<const PoseFrame> frames, const JointDef& def,
                                               double visibility_floor) {
  std::vector<BatchAngle> out(frames.size());
  const auto n = static_cast<std::int64_t>(frames.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto r = try_measure_joint(frames[i], def, visibility_floor);
    out[i] = {r.status == MeasureStatus::Ok ? r.theta_deg : 0.0, r.status};
  }
  return out;
}

std::vector<KinematicState> classify_batch_serial(std::span<const double> thetas, const Constraint& c,
                                                  const FeedbackConfig& cfg) {
  std::vector<KinematicState> out(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) out[i] = classify_angle(thetas[i], c, cfg);
  return out;
}

std::vector<KinematicState> classify_batch_parallel(std::span<const double> thetas, const Constraint& c,
                                                    const FeedbackConfig& cfg) {
  // classify_angle throws only for a missing limit; check once outside the region.
  if (!c.max_angle) return classify_batch_serial(thetas, c, cfg);
  std::vector<KinematicState> out(thetas.size());
  const auto n = static_cast<std::int64_t>(thetas.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = classify_angle(thetas[i], c, cfg);
  return out;
}

std::vector<double> abs_errors_serial(std::span<const BatchAngle> measured, std::span<const double> commanded) {
  if (measured.size() != commanded.size()) throw std::invalid_argument("size mismatch");
  std::vector<double> out;
  out.reserve(measured.size());
  for (std::size_t i = 0; i < measured.size(); ++i) {
    if (measured[i].status == MeasureStatus::Ok) out.push_back(std::fabs(measured[i].theta_deg - commanded[i]));
  }
  return out;
}

std::vector<double> abs_errors_parallel(std::span<const BatchAngle> measured, std::span<const double> commanded) {
  if (measured.size() != commanded.size()) throw std::invalid_argument("size mismatch");
  const auto n = static_cast<std::int64_t>(measured.size());
  std::vector<double> all(measured.size());
  std::vector<unsigned char> ok(measured.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    ok[i] = measured[i].status == MeasureStatus::Ok;
    all[i] = std::fabs(measured[i].theta_deg - commanded[i]);
  }
  // Compaction stays serial to keep the serial reference's order.
  std::vector<double> out;
  out.reserve(measured.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (ok[i]) out.push_back(all[i]);
  }
  return out;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace rehab::kernels
