#pragma once

#include "rehab/constraints.hpp"
#include "rehab/feedback.hpp"
#include "rehab/kinematics.hpp"
#include "rehab/synthesis.hpp"

#include <json.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rehab {

// The shared state threaded through extraction, synthesis, vision and
// feedback.
struct PatientState {
  ClinicalNote notes;
  ConstraintSet constraints;
  std::optional<std::string> video_url;
  std::optional<SynthesisPrompt> prompt;
  // pose: latest measurements
  std::uint64_t pose_frame_id = 0;
  std::vector<JointAngleSample> angles;
  std::vector<VelocitySample> velocities;
  std::optional<FeedbackEvent> feedback;
  std::string session_id;
  std::int64_t started_at_ms = 0;  // wall clock, unix epoch
  std::vector<std::string> warnings;
};

struct Phase1Options {
  std::string session_id;
  double safety_margin_deg = 1.0;
  std::chrono::milliseconds synthesis_timeout{60000};
  const PromptTemplate* prompt_template = nullptr;  // builtin when null
};

// Extraction -> validation -> synthesis. Throws NoConstraintsExtracted (and
// EmptyNote / ConflictingConstraints from the provider). A synthesis failure
// leaves video_url empty and records a warning.
PatientState phase1(const ClinicalNote& note, ExtractionProvider& extraction,
                    std::shared_ptr<SynthesisProvider> synthesis, const Phase1Options& opts = {});

// Same, for callers that already hold a constraint set.
PatientState phase1_with_constraints(const ClinicalNote& note, const ConstraintSet& constraints,
                                     std::shared_ptr<SynthesisProvider> synthesis, const Phase1Options& opts = {});

// --- session log -----------------------------------------------------------

struct LogRecord {
  enum class Kind : std::uint8_t { Eval, Drop };
  Kind kind = Kind::Eval;
  std::optional<std::uint64_t> frame_id;
  std::optional<std::int64_t> t_ms;
  // Eval
  std::vector<std::pair<std::string, double>> angles;  // constraint id -> measured angle
  std::vector<std::pair<std::string, KinematicState>> states;
  KinematicState state = KinematicState::NoData;
  std::optional<FeedbackEvent> event;
  double latency_us = 0.0;
  // Drop
  std::string reason;
  std::string detail;
};

class SessionLog {
public:
  void append(LogRecord r) { records_.push_back(std::move(r)); }
  const std::vector<LogRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  // One JSON object per line.
  void write_ndjson(std::ostream& out) const;
  // Emitted events only, as protocol event records. Deterministic.
  std::string event_log() const;

private:
  std::vector<LogRecord> records_;
};

nlohmann::ordered_json log_record_to_json(const LogRecord& r);

struct SessionSummary {
  double duration_ms = 0.0;
  std::size_t frames_processed = 0;
  std::size_t frames_dropped = 0;
  std::size_t events_emitted = 0;
  std::size_t critical_violations = 0;  // emitted CriticalViolation events
  std::size_t critical_frames = 0;
  std::array<double, kStateCount> dwell{};  // fraction of processed frames per state
  double latency_mean_us = 0.0;
  double latency_p95_us = 0.0;
  double latency_max_us = 0.0;

  nlohmann::ordered_json to_json(bool include_timing = true) const;
};

// Throws EmptyLog when no frame was processed.
SessionSummary summarize(const SessionLog& log);

// --- session ---------------------------------------------------------------

struct SessionOptions {
  FeedbackConfig feedback;
  KinematicsConfig kinematics;
  // Frames closer than 1000/max_eval_fps ms to the last processed frame are
  // dropped (logged). 0 disables the cap.
  double max_eval_fps = 120.0;
  std::shared_ptr<const MessageTable> messages;  // builtin when null
  // Monotonic nanoseconds for latency measurement; steady_clock when empty.
  std::function<std::int64_t()> clock_ns;
};

// One patient's real-time loop. Not re-entrant; confine to one thread.
class Session {
public:
  // Throws NoConstraintsExtracted when the state carries no constraints.
  Session(PatientState state, SessionOptions opts = {});
  ~Session();
  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;

  // Never throws on frame content: anomalies become drop records or NoData.
  std::optional<FeedbackEvent> step(const PoseFrame& frame);

  // For frames lost before reaching step (decode failures, queue eviction).
  void record_drop(std::optional<std::uint64_t> frame_id, std::optional<std::int64_t> t_ms, std::string reason,
                   std::string detail = {});

  const PatientState& state() const { return state_; }
  const SessionLog& log() const { return log_; }
  const SessionOptions& options() const { return opts_; }
  SessionSummary summary() const { return summarize(log_); }

private:
  struct Plan;
  PatientState state_;
  SessionOptions opts_;
  std::vector<Plan> plans_;
  Debouncer debouncer_;
  SessionLog log_;
  std::optional<std::int64_t> last_t_ms_;
  std::optional<std::uint64_t> last_frame_id_;
  std::shared_ptr<const MessageTable> messages_;
};

}  // namespace rehab
