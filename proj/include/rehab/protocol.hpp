#pragma once

#include "rehab/constraints.hpp"
#include "rehab/feedback.hpp"
#include "rehab/landmark.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace rehab {

// Newline-delimited JSON, one record per line:
//   {"type":"open","note":"..."} | {"type":"open","constraints":{...schema...}}
//   {"type":"frame","frame_id":N,"t_ms":N,"landmarks":[{"name","x","y","z","visibility"}]}
//   {"type":"event",...} {"type":"error","code":"...","detail":"..."} {"type":"heartbeat"}
enum class RecordType { Open, Frame, Event, Error, Heartbeat };

std::string_view record_type_name(RecordType t);
std::optional<RecordType> record_type_from_name(std::string_view name);

// Parses one line as a JSON object. Throws MalformedRecord with the byte
// offset of the syntax error.
nlohmann::json parse_record(std::string_view line);

// Landmarks may be named (canonical name or clinical alias) or, when a
// mapping is given, carry a model "index" instead. Extra fields are ignored.
// Throws MalformedRecord, UnknownLandmark, RangeViolation.
PoseFrame decode_frame(std::string_view line, const LandmarkMapping* mapping = nullptr);
PoseFrame frame_from_json(const nlohmann::json& rec, const LandmarkMapping* mapping = nullptr);

nlohmann::ordered_json frame_to_json(const PoseFrame& frame);
std::string encode_frame(const PoseFrame& frame);

struct OpenRecord {
  std::optional<std::string> note;
  std::string note_id;
  std::optional<ConstraintSet> constraints;
  std::optional<nlohmann::json> feedback_config;
};

// Throws MalformedRecord or SchemaViolation.
OpenRecord open_from_json(const nlohmann::json& rec);
std::string encode_open(const OpenRecord& open);

std::string encode_event(const FeedbackEvent& event);
std::string encode_error(std::string_view code, std::string_view detail);
std::string encode_heartbeat();

}  // namespace rehab
