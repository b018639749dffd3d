#include "rehab/kinematics.hpp"

#include "rehab/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rehab {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

bool usable_norm(double n) { return std::isfinite(n) && n > kDegenerateEps; }

// Index of the oldest sample within window_ms of the newest one.
template <typename T>
std::size_t window_start(std::span<const T> history, std::int64_t window_ms) {
  const auto t_last = history.back().t_ms;
  std::size_t j = history.size() - 1;
  while (j > 0 && t_last - history[j - 1].t_ms <= window_ms) --j;
  return j;
}

template <typename T>
void require_increasing(std::span<const T> history) {
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].t_ms <= history[i - 1].t_ms) {
      throw InsufficientHistory("velocity history timestamps must strictly increase");
    }
  }
}

struct CatalogEntry {
  std::string_view base;
  std::string_view axis;
  LandmarkId vertex, ray_a, ray_b;  // left-side landmarks, mirrored for right
  ProjectionPlane plane;
  bool flexion_from_straight;
};

constexpr std::array<CatalogEntry, 6> kCatalog = {{
    {"shoulder", "abduction", LandmarkId::LeftShoulder, LandmarkId::LeftElbow, LandmarkId::LeftHip,
     ProjectionPlane::Frontal, false},
    {"shoulder", "flexion", LandmarkId::LeftShoulder, LandmarkId::LeftElbow, LandmarkId::LeftHip,
     ProjectionPlane::Sagittal, false},
    {"elbow", "flexion", LandmarkId::LeftElbow, LandmarkId::LeftWrist, LandmarkId::LeftShoulder,
     ProjectionPlane::Sagittal, true},
    {"hip", "abduction", LandmarkId::LeftHip, LandmarkId::LeftKnee, LandmarkId::LeftShoulder,
     ProjectionPlane::Frontal, true},
    {"hip", "flexion", LandmarkId::LeftHip, LandmarkId::LeftKnee, LandmarkId::LeftShoulder,
     ProjectionPlane::Sagittal, true},
    {"knee", "flexion", LandmarkId::LeftKnee, LandmarkId::LeftAnkle, LandmarkId::LeftHip,
     ProjectionPlane::Sagittal, true},
}};

LandmarkId sided(LandmarkId left, Side side) { return side == Side::Left ? left : mirror(left); }

std::string sided_name(std::string_view base, Side side) {
  return std::string(side == Side::Left ? "left_" : "right_") + std::string(base);
}

std::string vis_message(LandmarkId id, double v) {
  return std::string(landmark_name(id)) + " visibility " + std::to_string(v) + " below floor";
}

}  // namespace

double angle_between(Vec3 a, Vec3 b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (!usable_norm(na) || !usable_norm(nb)) {
    throw DegenerateVector("angle_between: vector norm at or below 1e-9");
  }
  const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

Vec3 project(Vec3 v, ProjectionPlane plane) {
  switch (plane) {
    case ProjectionPlane::Frontal: return {v.x, v.y, 0.0};
    case ProjectionPlane::Sagittal: return {0.0, v.y, v.z};
    case ProjectionPlane::None: break;
  }
  return v;
}

MeasureResult try_measure_joint(const PoseFrame& frame, const JointDef& def,
                                double visibility_floor) noexcept {
  MeasureResult r;
  const std::array<LandmarkId, 3> ids = {def.vertex, def.ray_a, def.ray_b};
  std::array<Vec3, 3> pos;
  r.confidence = 1.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& lm = frame.at(ids[i]);
    if (!lm) {
      r.status = MeasureStatus::MissingLandmark;
      r.offending = ids[i];
      return r;
    }
    if (!(lm->visibility >= visibility_floor)) {
      r.status = MeasureStatus::LowConfidence;
      r.offending = ids[i];
      r.confidence = lm->visibility;
      return r;
    }
    pos[i] = lm->position();
    r.confidence = std::min(r.confidence, lm->visibility);
  }
  const Vec3 a = project(pos[1] - pos[0], def.plane);
  const Vec3 b = project(pos[2] - pos[0], def.plane);
  const double na = norm(a);
  const double nb = norm(b);
  if (!usable_norm(na) || !usable_norm(nb)) {
    r.status = MeasureStatus::DegenerateVector;
    r.offending = usable_norm(na) ? def.ray_b : def.ray_a;
    return r;
  }
  const double interior = std::acos(std::clamp(dot(a, b) / (na * nb), -1.0, 1.0)) * kRadToDeg;
  r.theta_deg = def.flexion_from_straight ? 180.0 - interior : interior;
  return r;
}

JointAngleSample measure_joint(const PoseFrame& frame, const JointDef& def, double visibility_floor) {
  const MeasureResult r = try_measure_joint(frame, def, visibility_floor);
  const std::string who(landmark_name(r.offending));
  switch (r.status) {
    case MeasureStatus::MissingLandmark:
      throw MissingLandmark(who, "missing landmark " + who);
    case MeasureStatus::LowConfidence:
      throw LowConfidence(who, r.confidence, vis_message(r.offending, r.confidence));
    case MeasureStatus::DegenerateVector:
      throw DegenerateVector("zero-length ray towards " + who + " at " + def.joint);
    case MeasureStatus::Ok: break;
  }
  return {def.joint, def.axis, r.theta_deg, frame.t_ms, r.confidence};
}

VelocitySample angular_velocity(std::span<const JointAngleSample> history, std::int64_t window_ms,
                                double alpha) {
  if (history.size() < 2) throw InsufficientHistory("need at least two angle samples");
  require_increasing(history);
  const std::size_t j = window_start(history, window_ms);
  const std::size_t last = history.size() - 1;
  if (j == last) throw InsufficientHistory("fewer than two samples inside the velocity window");

  double s = history.front().theta_deg;
  double s_j = s;
  for (std::size_t i = 1; i <= last; ++i) {
    s = alpha * history[i].theta_deg + (1.0 - alpha) * s;
    if (i == j) s_j = s;
  }
  const double dt_s = static_cast<double>(history[last].t_ms - history[j].t_ms) / 1000.0;
  VelocitySample v;
  v.joint = history.back().joint;
  v.omega_deg_s = (s - s_j) / dt_s;
  v.t_ms = history.back().t_ms;
  return v;
}

double landmark_speed(std::span<const TimedPoint> history, std::int64_t window_ms, double alpha) {
  if (history.size() < 2) throw InsufficientHistory("need at least two position samples");
  require_increasing(history);
  const std::size_t j = window_start(history, window_ms);
  const std::size_t last = history.size() - 1;
  if (j == last) throw InsufficientHistory("fewer than two samples inside the velocity window");

  Vec3 s = history.front().p;
  Vec3 s_j = s;
  for (std::size_t i = 1; i <= last; ++i) {
    s = alpha * history[i].p + (1.0 - alpha) * s;
    if (i == j) s_j = s;
  }
  const double dt_s = static_cast<double>(history[last].t_ms - history[j].t_ms) / 1000.0;
  return norm(s - s_j) / dt_s;
}

double body_length(const PoseFrame& frame, double visibility_floor) {
  double sum = 0.0;
  int sides = 0;
  for (auto [hip, ankle] : {std::pair{LandmarkId::LeftHip, LandmarkId::LeftAnkle},
                            std::pair{LandmarkId::RightHip, LandmarkId::RightAnkle}}) {
    const auto& h = frame.at(hip);
    const auto& a = frame.at(ankle);
    if (!h || !a || !(h->visibility >= visibility_floor) || !(a->visibility >= visibility_floor)) continue;
    sum += norm(h->position() - a->position());
    ++sides;
  }
  if (sides == 0) throw MissingLandmark("left_hip", "no visible hip/ankle pair for body length");
  const double len = sum / sides;
  if (!usable_norm(len)) throw DegenerateVector("body length is zero");
  return len;
}

SpatialRelation spatial_relation_from_name(std::string_view name) {
  if (name == "behind_toe") return SpatialRelation::BehindToe;
  throw UnknownRelation("unknown spatial relation '" + std::string(name) + "'");
}

std::string_view spatial_relation_name(SpatialRelation rel) {
  switch (rel) {
    case SpatialRelation::BehindToe: return "behind_toe";
  }
  return "unknown";
}

SpatialResult eval_spatial_relation(const PoseFrame& frame, SpatialRelation relation, Side side,
                                    double visibility_floor) {
  const auto need = [&](LandmarkId id) -> Vec3 {
    const auto& lm = frame.at(id);
    const std::string who(landmark_name(id));
    if (!lm) throw MissingLandmark(who, "missing landmark " + who);
    if (!(lm->visibility >= visibility_floor)) {
      throw LowConfidence(who, lm->visibility, vis_message(id, lm->visibility));
    }
    return lm->position();
  };

  switch (relation) {
    case SpatialRelation::BehindToe: {
      const Vec3 knee = need(sided(LandmarkId::LeftKnee, side));
      const Vec3 toe = need(sided(LandmarkId::LeftFootIndex, side));
      const Vec3 ankle = need(sided(LandmarkId::LeftAnkle, side));
      const double len = body_length(frame, visibility_floor);
      // Forward is the horizontal (x,z) component of ankle -> toe.
      Vec3 forward = toe - ankle;
      forward.y = 0.0;
      const double fn = norm(forward);
      if (!usable_norm(fn)) throw DegenerateVector("foot has no horizontal extent");
      Vec3 d = knee - toe;
      d.y = 0.0;
      const double displacement = dot(d, forward) / fn;
      return {displacement <= 0.0, displacement / len};
    }
  }
  throw UnknownRelation("unhandled spatial relation");
}

std::optional<JointRef> parse_joint(std::string_view joint) {
  JointRef ref;
  std::string_view base = joint;
  if (base.starts_with("left_")) {
    ref.side = Side::Left;
    base.remove_prefix(5);
  } else if (base.starts_with("right_")) {
    ref.side = Side::Right;
    base.remove_prefix(6);
  }
  static constexpr std::array<std::string_view, 6> kBases = {"shoulder", "elbow", "wrist",
                                                             "hip",      "knee",  "ankle"};
  if (std::find(kBases.begin(), kBases.end(), base) == kBases.end()) return std::nullopt;
  ref.base = std::string(base);
  return ref;
}

std::optional<JointDef> catalog_joint_def(std::string_view base, std::string_view axis, Side side,
                                          bool use_plane_projection) {
  for (const auto& e : kCatalog) {
    if (e.base != base || e.axis != axis) continue;
    JointDef def;
    def.joint = sided_name(base, side);
    def.axis = std::string(axis);
    def.vertex = sided(e.vertex, side);
    def.ray_a = sided(e.ray_a, side);
    def.ray_b = sided(e.ray_b, side);
    def.plane = use_plane_projection ? e.plane : ProjectionPlane::None;
    def.flexion_from_straight = e.flexion_from_straight;
    return def;
  }
  return std::nullopt;
}

bool catalog_has(std::string_view base, std::string_view axis) {
  return std::any_of(kCatalog.begin(), kCatalog.end(),
                     [&](const CatalogEntry& e) { return e.base == base && e.axis == axis; });
}

LandmarkId tracked_landmark(std::string_view base, Side side) {
  LandmarkId left = LandmarkId::LeftKnee;
  if (base == "shoulder" || base == "elbow" || base == "wrist") left = LandmarkId::LeftWrist;
  else if (base == "hip" || base == "knee") left = LandmarkId::LeftKnee;
  else if (base == "ankle") left = LandmarkId::LeftAnkle;
  return sided(left, side);
}

}  // namespace rehab
