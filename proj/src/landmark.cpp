#include "rehab/landmark.hpp"

#include "rehab/data.hpp"
#include "rehab/error.hpp"

#include <json.hpp>

#include <cmath>

namespace rehab {

namespace {

constexpr std::array<std::string_view, kLandmarkCount> kNames = {
    "nose",           "left_shoulder",   "right_shoulder",   "left_elbow",  "right_elbow",
    "left_wrist",     "right_wrist",     "left_hip",         "right_hip",   "left_knee",
    "right_knee",     "left_ankle",      "right_ankle",      "left_heel",   "right_heel",
    "left_foot_index", "right_foot_index",
};

struct Alias {
  std::string_view alias;
  std::string_view canonical;
};

// Clinical names for the upper-limb bony landmarks.
constexpr std::array<Alias, 6> kAliases = {{
    {"left_acromion", "left_shoulder"},
    {"right_acromion", "right_shoulder"},
    {"left_lateral_epicondyle", "left_elbow"},
    {"right_lateral_epicondyle", "right_elbow"},
    {"left_ulnar_styloid", "left_wrist"},
    {"right_ulnar_styloid", "right_wrist"},
}};

}  // namespace

std::string_view landmark_name(LandmarkId id) { return kNames[static_cast<std::size_t>(id)]; }

std::optional<LandmarkId> landmark_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<LandmarkId>(i);
  }
  for (const auto& a : kAliases) {
    if (a.alias == name) return landmark_from_name(a.canonical);
  }
  return std::nullopt;
}

LandmarkId mirror(LandmarkId id) {
  if (id == LandmarkId::Nose) return id;
  // Left/right pairs are adjacent with left on the odd index.
  auto i = static_cast<std::uint8_t>(id);
  return static_cast<LandmarkId>(i % 2 == 1 ? i + 1 : i - 1);
}

double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

std::size_t PoseFrame::landmark_count() const {
  std::size_t n = 0;
  for (const auto& lm : landmarks) n += lm.has_value();
  return n;
}

LandmarkMapping LandmarkMapping::from_json(std::string_view text) {
  auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("map") || !doc["map"].is_object()) {
    throw SchemaViolation("map", "landmark mapping must be an object with a \"map\" object");
  }
  std::unordered_map<int, LandmarkId> table;
  for (const auto& [key, value] : doc["map"].items()) {
    int index = 0;
    try {
      index = std::stoi(key);
    } catch (const std::exception&) {
      throw SchemaViolation("map." + key, "index key is not an integer");
    }
    if (!value.is_string()) throw SchemaViolation("map." + key, "expected landmark name");
    auto id = landmark_from_name(value.get<std::string>());
    if (!id) throw UnknownLandmark("unknown landmark '" + value.get<std::string>() + "' in mapping");
    table.emplace(index, *id);
  }
  return LandmarkMapping(std::move(table));
}

const LandmarkMapping& LandmarkMapping::blazepose33() {
  static const LandmarkMapping m = from_json(embedded_data("landmark_map_blazepose33.json"));
  return m;
}

std::optional<LandmarkId> LandmarkMapping::lookup(int index) const {
  auto it = table_.find(index);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

bool LandmarkMapping::covers_all_canonical() const {
  std::array<bool, kLandmarkCount> seen{};
  for (const auto& [index, id] : table_) seen[static_cast<std::size_t>(id)] = true;
  for (bool s : seen) {
    if (!s) return false;
  }
  return true;
}

}  // namespace rehab
