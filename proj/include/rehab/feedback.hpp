#pragma once

#include "rehab/constraints.hpp"
#include "rehab/kinematics.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rehab {

struct FeedbackConfig {
  double delta_deg = 5.0;
  double optimal_band_deg = 10.0;
  double under_band_deg = 15.0;
  int stability_frames = 3;
  std::int64_t min_message_interval_ms = 1000;
  bool critical_bypasses_debounce = true;

  // Throws std::invalid_argument when the band invariants do not hold.
  void check() const;
  nlohmann::ordered_json to_json() const;
  // Missing keys keep their current values; unknown keys are ignored.
  void apply_json(const nlohmann::json& j);
};

enum class KinematicState : std::uint8_t {
  NoData = 0,
  Approaching,
  Optimal,
  UnderExtension,
  HighVelocity,
  SpatialViolation,
  CriticalViolation,
};

inline constexpr std::size_t kStateCount = 7;
inline constexpr std::array<KinematicState, kStateCount> kAllStates = {
    KinematicState::NoData,       KinematicState::Approaching,      KinematicState::Optimal,
    KinematicState::UnderExtension, KinematicState::HighVelocity, KinematicState::SpatialViolation,
    KinematicState::CriticalViolation,
};

// Resolution precedence; the enum is declared in ascending order.
inline constexpr int priority(KinematicState s) { return static_cast<int>(s); }

std::string_view state_name(KinematicState s);
std::optional<KinematicState> state_from_name(std::string_view name);

enum class Severity : std::uint8_t { Silent, Praise, Encourage, Pace, Stop };

std::string_view severity_name(Severity s);
Severity severity_for(KinematicState s);

struct FeedbackEvent {
  std::uint64_t frame_id = 0;
  std::int64_t t_ms = 0;
  KinematicState state = KinematicState::NoData;
  std::string message;
  std::optional<double> theta_deg;
  std::optional<std::string> violated_constraint_id;
  Severity severity = Severity::Silent;

  friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
};

// Wire form: {"type":"event",...}.
nlohmann::ordered_json event_to_json(const FeedbackEvent& e);
FeedbackEvent event_from_json(const nlohmann::json& j);

// Throws MissingLimit when the constraint has no max_angle.
KinematicState classify_angle(double theta_deg, const Constraint& constraint, const FeedbackConfig& cfg);

// Compares |omega| (deg/s) when the constraint has an axis, v_norm otherwise.
std::optional<KinematicState> classify_velocity(const VelocitySample& v, const Constraint& constraint);

// Highest-priority state; NoData for an empty input.
KinematicState resolve(std::span<const KinematicState> states);

// (state, joint) -> template with {joint}, {theta}, {limit}.
class MessageTable {
public:
  static MessageTable from_json(std::string_view text);
  static const MessageTable& builtin();

  // Empty string for silent states.
  std::string render(KinematicState state, std::string_view joint = "*",
                     std::optional<double> theta = std::nullopt,
                     std::optional<double> limit = std::nullopt) const;

private:
  struct Row {
    KinematicState state;
    std::string joint;
    std::string tmpl;
  };
  const Row* lookup(KinematicState state, std::string_view joint) const;
  std::vector<Row> rows_;
};

// Default message for a state; empty when the state is silent.
std::string render(KinematicState state);

// One entry per evaluated frame, emitted or not.
struct DebounceRecord {
  std::uint64_t frame_id = 0;
  std::int64_t t_ms = 0;
  KinematicState state = KinematicState::NoData;
  bool emitted = false;
};

// Reference gate over the full per-frame history (ordered by t_ms).
std::optional<FeedbackEvent> debounce(const FeedbackEvent& candidate, std::span<const DebounceRecord> history,
                                      const FeedbackConfig& cfg);

// Incremental equivalent of `debounce` with bounded memory; session-confined.
class Debouncer {
public:
  explicit Debouncer(FeedbackConfig cfg) : cfg_(cfg) {}

  std::optional<FeedbackEvent> offer(const FeedbackEvent& candidate);
  void reset();

private:
  FeedbackConfig cfg_;
  std::optional<KinematicState> run_state_;
  int run_length_ = 0;
  std::array<std::optional<std::int64_t>, kStateCount> last_emit_t_{};
};

}  // namespace rehab
