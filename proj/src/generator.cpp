#include "rehab/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rehab {

namespace {

constexpr Vec3 kVertex{0.5, 0.4, 0.0};
constexpr double kTrunkLength = 0.3;
constexpr double kArcRadius = 0.25;
constexpr double kFollowerRadius = 0.45;
constexpr double kVisibility = 0.98;

struct NeutralPoint {
  LandmarkId id;
  Vec3 p;
};

// Patient faces the camera; their left side sits at larger x. Toes point
// towards the camera (negative z). Arms hang along the shoulder-hip line so
// every catalog angle reads 0 at rest.
constexpr std::array<NeutralPoint, kLandmarkCount> kNeutral = {{
    {LandmarkId::Nose, {0.45, 0.25, -0.05}},
    {LandmarkId::LeftShoulder, {0.50, 0.40, 0.0}},
    {LandmarkId::RightShoulder, {0.36, 0.40, 0.0}},
    {LandmarkId::LeftElbow, {0.50, 0.55, 0.0}},
    {LandmarkId::RightElbow, {0.38, 0.55, 0.0}},
    {LandmarkId::LeftWrist, {0.50, 0.67, 0.0}},
    {LandmarkId::RightWrist, {0.396, 0.67, 0.0}},
    {LandmarkId::LeftHip, {0.50, 0.70, 0.0}},
    {LandmarkId::RightHip, {0.40, 0.70, 0.0}},
    {LandmarkId::LeftKnee, {0.50, 0.83, 0.0}},
    {LandmarkId::RightKnee, {0.40, 0.83, 0.0}},
    {LandmarkId::LeftAnkle, {0.50, 0.95, 0.0}},
    {LandmarkId::RightAnkle, {0.40, 0.95, 0.0}},
    {LandmarkId::LeftHeel, {0.50, 0.965, 0.02}},
    {LandmarkId::RightHeel, {0.40, 0.965, 0.02}},
    {LandmarkId::LeftFootIndex, {0.50, 0.97, -0.08}},
    {LandmarkId::RightFootIndex, {0.40, 0.97, -0.08}},
}};

bool is_left(LandmarkId id) { return static_cast<int>(id) % 2 == 1; }

void place(PoseFrame& f, LandmarkId id, Vec3 p) { f.set({id, p.x, p.y, p.z, kVisibility}); }

}  // namespace

JointDef TrajectorySpec::default_joint() { return *catalog_joint_def("shoulder", "abduction", Side::Left); }

void TrajectorySpec::check() const {
  if (!(peak_angle_deg > 0.0 && peak_angle_deg <= 180.0)) throw std::invalid_argument("peak_angle_deg must be in (0,180]");
  if (!(fps > 0.0)) throw std::invalid_argument("fps must be positive");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  if (!(period_ms > 0.0)) throw std::invalid_argument("period_ms must be positive");
  if (repetitions < 0) throw std::invalid_argument("repetitions must be >= 0");
  if (hold_angle_deg && !(*hold_angle_deg >= 0.0 && *hold_angle_deg <= 180.0)) {
    throw std::invalid_argument("hold_angle_deg must be in [0,180]");
  }
}

double commanded_angle(const TrajectorySpec& spec, double t_ms) {
  if (spec.hold_angle_deg) return *spec.hold_angle_deg;
  return spec.peak_angle_deg * (1.0 - std::cos(2.0 * std::numbers::pi * t_ms / spec.period_ms)) / 2.0;
}

PoseFrame neutral_pose() {
  PoseFrame f;
  for (const auto& n : kNeutral) place(f, n.id, n.p);
  return f;
}

PoseFrame pose_at_angle(const JointDef& def, double theta_deg) {
  PoseFrame f = neutral_pose();
  const double interior = def.flexion_from_straight ? 180.0 - theta_deg : theta_deg;
  const double phi = interior * std::numbers::pi / 180.0;
  // Swing outward: +x for the patient's left, -x for the right.
  const double outward = is_left(def.vertex) || def.vertex == LandmarkId::Nose ? 1.0 : -1.0;
  const Vec3 dir{outward * std::sin(phi), std::cos(phi), 0.0};

  place(f, def.vertex, kVertex);
  place(f, def.ray_b, kVertex + Vec3{0.0, kTrunkLength, 0.0});
  place(f, def.ray_a, kVertex + kArcRadius * dir);

  // Keep a straight arm: the wrist follows the elbow along the same ray.
  const bool elbow_ray = def.ray_a == LandmarkId::LeftElbow || def.ray_a == LandmarkId::RightElbow;
  if (elbow_ray) {
    const LandmarkId wrist = def.ray_a == LandmarkId::LeftElbow ? LandmarkId::LeftWrist : LandmarkId::RightWrist;
    if (wrist != def.vertex && wrist != def.ray_b) place(f, wrist, kVertex + kFollowerRadius * dir);
  }
  return f;
}

TrajectoryGenerator::TrajectoryGenerator(TrajectorySpec spec)
    : spec_(std::move(spec)), rng_(spec_.seed), noise_(0.0, 1.0) {
  spec_.check();
  if (spec_.frame_count) {
    count_ = *spec_.frame_count;
  } else {
    const double total_ms = spec_.repetitions * spec_.period_ms;
    count_ = static_cast<std::size_t>(std::llround(total_ms * spec_.fps / 1000.0));
  }
}

std::int64_t TrajectoryGenerator::t_ms_of(std::size_t k) const {
  return std::llround(static_cast<double>(k) * 1000.0 / spec_.fps);
}

PoseFrame TrajectoryGenerator::next() {
  const std::size_t k = next_++;
  const std::int64_t t = t_ms_of(k);
  PoseFrame f = pose_at_angle(spec_.joint, commanded_angle(spec_, static_cast<double>(t)));
  f.frame_id = spec_.first_frame_id + k;
  f.t_ms = t;
  if (spec_.noise_sigma > 0.0) {
    for (auto& slot : f.landmarks) {
      if (!slot) continue;
      slot->x = std::clamp(slot->x + spec_.noise_sigma * noise_(rng_), 0.0, 1.0);
      slot->y = std::clamp(slot->y + spec_.noise_sigma * noise_(rng_), 0.0, 1.0);
      slot->z += spec_.noise_sigma * noise_(rng_);
    }
  }
  return f;
}

std::vector<PoseFrame> generate(const TrajectorySpec& spec) {
  TrajectoryGenerator gen(spec);
  std::vector<PoseFrame> out;
  out.reserve(gen.frame_count());
  while (!gen.done()) out.push_back(gen.next());
  return out;
}

}  // namespace rehab
