#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace rehab {

// Canonical 17-point anatomical enumeration. Order is part of the wire
// contract for index-based mappings, do not reorder.
enum class LandmarkId : std::uint8_t {
  Nose = 0,
  LeftShoulder,
  RightShoulder,
  LeftElbow,
  RightElbow,
  LeftWrist,
  RightWrist,
  LeftHip,
  RightHip,
  LeftKnee,
  RightKnee,
  LeftAnkle,
  RightAnkle,
  LeftHeel,
  RightHeel,
  LeftFootIndex,
  RightFootIndex,
};

inline constexpr std::size_t kLandmarkCount = 17;

enum class Side : std::uint8_t { Left, Right };

std::string_view landmark_name(LandmarkId id);

// Accepts canonical names ("left_shoulder") and clinical aliases
// ("left_acromion", "right_lateral_epicondyle", "left_ulnar_styloid").
std::optional<LandmarkId> landmark_from_name(std::string_view name);

// Same body part on the other side. Nose maps to itself.
LandmarkId mirror(LandmarkId id);

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double dot(Vec3 a, Vec3 b);
double norm(Vec3 a);

struct Landmark {
  LandmarkId id = LandmarkId::Nose;
  double x = 0.0;  // normalized image coordinate, [0,1]
  double y = 0.0;  // normalized image coordinate, [0,1]
  double z = 0.0;  // camera-relative depth, body-scale units
  double visibility = 1.0;

  Vec3 position() const { return {x, y, z}; }
  friend bool operator==(const Landmark&, const Landmark&) = default;
};

// One time-stamped landmark set. Slots are indexed by LandmarkId, which makes
// duplicate names unrepresentable once a frame is built.
struct PoseFrame {
  std::uint64_t frame_id = 0;
  std::int64_t t_ms = 0;
  std::array<std::optional<Landmark>, kLandmarkCount> landmarks{};

  const std::optional<Landmark>& at(LandmarkId id) const {
    return landmarks[static_cast<std::size_t>(id)];
  }
  void set(const Landmark& lm) { landmarks[static_cast<std::size_t>(lm.id)] = lm; }
  std::size_t landmark_count() const;

  friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

// External pose-model index -> canonical landmark. Used at ingestion for
// estimators that emit index-ordered keypoints.
class LandmarkMapping {
public:
  LandmarkMapping() = default;
  explicit LandmarkMapping(std::unordered_map<int, LandmarkId> table) : table_(std::move(table)) {}

  // {"version":1,"name":"...","map":{"11":"left_shoulder",...}}
  static LandmarkMapping from_json(std::string_view text);
  // 33-point layout used by common off-the-shelf pose landmark models.
  static const LandmarkMapping& blazepose33();

  std::optional<LandmarkId> lookup(int index) const;
  bool covers_all_canonical() const;
  std::size_t size() const { return table_.size(); }

private:
  std::unordered_map<int, LandmarkId> table_;
};

}  // namespace rehab
