#include "rehab/protocol.hpp"

#include "rehab/error.hpp"

#include <array>
#include <cmath>

namespace rehab {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 5> kTypeNames = {"open", "frame", "event", "error", "heartbeat"};

std::string_view strip_eol(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  return line;
}

double coord(const json& lm, const char* field, std::size_t i, bool required, double fallback) {
  if (!lm.contains(field)) {
    if (required) throw MalformedRecord(0, "landmarks[" + std::to_string(i) + "]." + field + " missing");
    return fallback;
  }
  if (!lm[field].is_number()) {
    throw MalformedRecord(0, "landmarks[" + std::to_string(i) + "]." + field + " is not a number");
  }
  return lm[field].get<double>();
}

}  // namespace

std::string_view record_type_name(RecordType t) { return kTypeNames[static_cast<std::size_t>(t)]; }

std::optional<RecordType> record_type_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<RecordType>(i);
  }
  return std::nullopt;
}

json parse_record(std::string_view line) {
  line = strip_eol(line);
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedRecord(e.byte, std::string("invalid JSON: ") + e.what());
  } catch (const json::exception& e) {
    // number overflow has no byte position; point at the quoted token
    std::string_view what = e.what();
    std::size_t at = 0;
    if (const auto q = what.find('\''); q != std::string_view::npos) {
      const auto token = what.substr(q + 1, what.rfind('\'') - q - 1);
      if (const auto pos = line.find(token); pos != std::string_view::npos) at = pos;
    }
    throw MalformedRecord(at, std::string("invalid JSON: ") + e.what());
  }
  if (!rec.is_object()) throw MalformedRecord(0, "record is not a JSON object");
  return rec;
}

PoseFrame frame_from_json(const json& rec, const LandmarkMapping* mapping) {
  if (rec.contains("type") && rec["type"] != "frame") throw MalformedRecord(0, "record is not a frame");
  if (!rec.contains("frame_id") || !rec["frame_id"].is_number_unsigned()) {
    throw MalformedRecord(0, "frame_id must be a non-negative integer");
  }
  if (!rec.contains("t_ms") || !rec["t_ms"].is_number_integer()) {
    throw MalformedRecord(0, "t_ms must be an integer");
  }
  if (!rec.contains("landmarks") || !rec["landmarks"].is_array()) {
    throw MalformedRecord(0, "landmarks must be an array");
  }

  PoseFrame f;
  f.frame_id = rec["frame_id"].get<std::uint64_t>();
  f.t_ms = rec["t_ms"].get<std::int64_t>();
  const auto& lms = rec["landmarks"];
  for (std::size_t i = 0; i < lms.size(); ++i) {
    const auto& lm = lms[i];
    const std::string path = "landmarks[" + std::to_string(i) + "]";
    if (!lm.is_object()) throw MalformedRecord(0, path + " is not an object");

    std::optional<LandmarkId> id;
    std::string label;
    if (lm.contains("name")) {
      if (!lm["name"].is_string()) throw MalformedRecord(0, path + ".name is not a string");
      label = lm["name"].get<std::string>();
      id = landmark_from_name(label);
    } else if (lm.contains("index") && mapping) {
      if (!lm["index"].is_number_integer()) throw MalformedRecord(0, path + ".index is not an integer");
      label = "index " + std::to_string(lm["index"].get<int>());
      id = mapping->lookup(lm["index"].get<int>());
    } else {
      throw MalformedRecord(0, path + " has no name");
    }
    if (!id) throw UnknownLandmark("unknown landmark '" + label + "' at " + path);

    Landmark out;
    out.id = *id;
    out.x = coord(lm, "x", i, true, 0.0);
    out.y = coord(lm, "y", i, true, 0.0);
    out.z = coord(lm, "z", i, false, 0.0);
    out.visibility = coord(lm, "visibility", i, false, 1.0);
    if (!(out.x >= 0.0 && out.x <= 1.0) || !(out.y >= 0.0 && out.y <= 1.0)) {
      throw RangeViolation(path + " (" + std::string(landmark_name(out.id)) + ") x/y outside [0,1]");
    }
    if (!(out.visibility >= 0.0 && out.visibility <= 1.0)) {
      throw RangeViolation(path + " visibility outside [0,1]");
    }
    if (!std::isfinite(out.z)) throw RangeViolation(path + " z is not finite");
    if (f.at(out.id)) {
      throw MalformedRecord(0, "duplicate landmark '" + std::string(landmark_name(out.id)) + "' at " + path);
    }
    f.set(out);
  }
  return f;
}

PoseFrame decode_frame(std::string_view line, const LandmarkMapping* mapping) {
  return frame_from_json(parse_record(line), mapping);
}

nlohmann::ordered_json frame_to_json(const PoseFrame& frame) {
  nlohmann::ordered_json j;
  j["type"] = "frame";
  j["frame_id"] = frame.frame_id;
  j["t_ms"] = frame.t_ms;
  j["landmarks"] = nlohmann::ordered_json::array();
  for (const auto& lm : frame.landmarks) {
    if (!lm) continue;
    nlohmann::ordered_json l;
    l["name"] = std::string(landmark_name(lm->id));
    l["x"] = lm->x;
    l["y"] = lm->y;
    l["z"] = lm->z;
    l["visibility"] = lm->visibility;
    j["landmarks"].push_back(std::move(l));
  }
  return j;
}

std::string encode_frame(const PoseFrame& frame) { return frame_to_json(frame).dump(); }

OpenRecord open_from_json(const json& rec) {
  if (rec.value("type", "") != "open") throw MalformedRecord(0, "expected an open record");
  OpenRecord o;
  o.note_id = rec.value("note_id", "");
  if (rec.contains("note")) {
    if (!rec["note"].is_string()) throw MalformedRecord(0, "note must be a string");
    o.note = rec["note"].get<std::string>();
  }
  if (rec.contains("constraints")) o.constraints = from_schema(rec["constraints"]);
  if (!o.note && !o.constraints) throw MalformedRecord(0, "open record needs note or constraints");
  if (rec.contains("feedback_config")) {
    if (!rec["feedback_config"].is_object()) throw MalformedRecord(0, "feedback_config must be an object");
    o.feedback_config = rec["feedback_config"];
  }
  return o;
}

std::string encode_open(const OpenRecord& open) {
  nlohmann::ordered_json j;
  j["type"] = "open";
  if (!open.note_id.empty()) j["note_id"] = open.note_id;
  if (open.note) j["note"] = *open.note;
  if (open.constraints) j["constraints"] = to_schema_json(*open.constraints);
  if (open.feedback_config) j["feedback_config"] = *open.feedback_config;
  return j.dump();
}

std::string encode_event(const FeedbackEvent& event) { return event_to_json(event).dump(); }

std::string encode_error(std::string_view code, std::string_view detail) {
  nlohmann::ordered_json j;
  j["type"] = "error";
  j["code"] = std::string(code);
  j["detail"] = std::string(detail);
  // Details may echo raw client bytes.
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

std::string encode_heartbeat() { return R"({"type":"heartbeat"})"; }

}  // namespace rehab
