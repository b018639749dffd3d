#pragma once

#include "rehab/landmark.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace rehab {

inline constexpr double kDegenerateEps = 1e-9;

enum class ProjectionPlane : std::uint8_t {
  None,
  Frontal,   // drop z: image plane of a camera facing the patient
  Sagittal,  // drop x: plane containing the camera axis and vertical
};

// Maps a clinical (joint, axis) pair to a measurable angle at `vertex`
// between vertex->ray_a and vertex->ray_b.
struct JointDef {
  std::string joint;  // e.g. "left_shoulder"
  std::string axis;   // e.g. "abduction"
  LandmarkId vertex = LandmarkId::LeftShoulder;
  LandmarkId ray_a = LandmarkId::LeftElbow;
  LandmarkId ray_b = LandmarkId::LeftHip;
  ProjectionPlane plane = ProjectionPlane::None;
  // Report 180 - interior angle, so a straight limb reads 0 degrees of flexion.
  bool flexion_from_straight = false;
};

struct JointAngleSample {
  std::string joint;
  std::string axis;
  double theta_deg = 0.0;
  std::int64_t t_ms = 0;
  double confidence = 0.0;
};

struct VelocitySample {
  std::string joint;
  double omega_deg_s = 0.0;  // signed angular velocity
  double v_norm = 0.0;       // landmark speed in body-lengths per second
  std::int64_t t_ms = 0;
};

struct KinematicsConfig {
  double visibility_floor = 0.5;
  double ema_alpha = 0.5;  // 1 disables smoothing
  std::int64_t velocity_window_ms = 100;
  std::int64_t history_ms = 1000;  // retained velocity history per joint
  bool use_plane_projection = false;
};

// Degrees in [0,180]. Throws DegenerateVector if either norm <= 1e-9.
double angle_between(Vec3 a, Vec3 b);

Vec3 project(Vec3 v, ProjectionPlane plane);

// Non-throwing measurement core shared by measure_joint and the batch kernels.
enum class MeasureStatus : std::uint8_t { Ok, MissingLandmark, LowConfidence, DegenerateVector };

struct MeasureResult {
  MeasureStatus status = MeasureStatus::Ok;
  double theta_deg = 0.0;
  double confidence = 0.0;
  LandmarkId offending = LandmarkId::Nose;  // valid when status != Ok
};

MeasureResult try_measure_joint(const PoseFrame& frame, const JointDef& def,
                                double visibility_floor = 0.5) noexcept;

// Throws MissingLandmark, LowConfidence or DegenerateVector.
JointAngleSample measure_joint(const PoseFrame& frame, const JointDef& def,
                               double visibility_floor = 0.5);

// Exponential smoothing over the whole history, then a backward difference
// between the newest smoothed sample and the oldest one inside window_ms.
// Throws InsufficientHistory.
VelocitySample angular_velocity(std::span<const JointAngleSample> history,
                                std::int64_t window_ms, double alpha = 0.5);

struct TimedPoint {
  std::int64_t t_ms = 0;
  Vec3 p;
};

// Same estimator applied per component; returns speed in units/second.
double landmark_speed(std::span<const TimedPoint> history, std::int64_t window_ms,
                      double alpha = 0.5);

// Mean hip-to-ankle distance over the sides where both are present.
double body_length(const PoseFrame& frame, double visibility_floor = 0.5);

enum class SpatialRelation : std::uint8_t { BehindToe };

// Throws UnknownRelation.
SpatialRelation spatial_relation_from_name(std::string_view name);
std::string_view spatial_relation_name(SpatialRelation rel);

struct SpatialResult {
  bool satisfied = true;
  double margin_norm = 0.0;  // signed, body-lengths; > 0 means violated
};

SpatialResult eval_spatial_relation(const PoseFrame& frame, SpatialRelation relation, Side side,
                                    double visibility_floor = 0.5);

// --- joint catalog -------------------------------------------------------

struct JointRef {
  std::string base;           // "shoulder", "knee", ...
  std::optional<Side> side;   // absent: evaluate both sides
};

// "left_knee" -> {knee, Left}; "knee" -> {knee, nullopt}. nullopt if unknown.
std::optional<JointRef> parse_joint(std::string_view joint);

std::optional<JointDef> catalog_joint_def(std::string_view base, std::string_view axis, Side side,
                                          bool use_plane_projection = false);

bool catalog_has(std::string_view base, std::string_view axis);

// Landmark whose speed stands for the joint's motion (distal point for the
// upper limb, the joint itself for the lower limb).
LandmarkId tracked_landmark(std::string_view base, Side side);

}  // namespace rehab
