#pragma once

#include "rehab/protocol.hpp"
#include "rehab/session.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace rehab {

// What a connection or replay needs to turn an open record into a Session.
struct EngineConfig {
  SessionOptions session;
  Phase1Options phase1;
  std::shared_ptr<ExtractionProvider> extraction;  // grammar when null
  std::shared_ptr<SynthesisProvider> synthesis;    // mock when null
  const LandmarkMapping* mapping = nullptr;        // for index-only landmarks
};

// Open records may override FeedbackConfig fields. Throws
// NoConstraintsExtracted, EmptyNote, ConflictingConstraints, RangeViolation
// (bad feedback_config).
Session session_from_open(const OpenRecord& open, const EngineConfig& cfg);

// One decoded line of a recording. Frames that were readable but invalid
// (range, unknown landmark) are kept as drops so the session logs them.
struct ReplayItem {
  std::optional<PoseFrame> frame;
  std::optional<std::uint64_t> frame_id;
  std::optional<std::int64_t> t_ms;
  std::string drop_reason;
  std::string drop_detail;
};

struct Recording {
  std::optional<OpenRecord> open;
  std::vector<ReplayItem> items;
  std::vector<std::string> warnings;
};

// Event, error and heartbeat lines are skipped. A broken line throws
// MalformedRecord carrying its line number, except an unterminated last line,
// which is dropped with a warning.
Recording read_recording(std::istream& in, const LandmarkMapping* mapping = nullptr);
// Also throws FileUnreadable.
Recording load_recording(const std::string& path, const LandmarkMapping* mapping = nullptr);

struct ReplayOptions {
  double speed = 0.0;  // 0: as fast as possible; otherwise recorded gaps / speed
  std::function<void(const FeedbackEvent&)> on_event;
};

// Feeds the recording into sink. Throws EmptyLog when no frame was processed.
SessionSummary replay(const Recording& rec, Session& sink, const ReplayOptions& opts = {});

}  // namespace rehab
