#include "rehab/feedback.hpp"

#include "rehab/data.hpp"
#include "rehab/error.hpp"
#include "rehab/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace rehab {

namespace {

constexpr std::array<std::string_view, kStateCount> kStateNames = {
    "NoData", "Approaching", "Optimal", "UnderExtension", "HighVelocity", "SpatialViolation", "CriticalViolation",
};

constexpr std::array<std::string_view, 5> kSeverityNames = {"silent", "praise", "encourage", "pace", "stop"};

std::string format_number(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string human_joint(std::string_view joint) {
  std::string s(joint);
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

void replace_all(std::string& s, std::string_view token, const std::string& value) {
  for (std::size_t pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + value.size())) {
    s.replace(pos, token.size(), value);
  }
}

bool is_silent(KinematicState s) { return severity_for(s) == Severity::Silent; }

}  // namespace

void FeedbackConfig::check() const {
  if (!(delta_deg > 0.0)) throw std::invalid_argument("delta_deg must be positive");
  if (!(optimal_band_deg > 0.0) || !(optimal_band_deg <= under_band_deg)) {
    throw std::invalid_argument("bands must satisfy 0 < optimal_band_deg <= under_band_deg");
  }
  if (stability_frames < 1) throw std::invalid_argument("stability_frames must be >= 1");
  if (min_message_interval_ms < 0) throw std::invalid_argument("min_message_interval_ms must be >= 0");
}

nlohmann::ordered_json FeedbackConfig::to_json() const {
  nlohmann::ordered_json j;
  j["delta_deg"] = json_number(delta_deg);
  j["optimal_band_deg"] = json_number(optimal_band_deg);
  j["under_band_deg"] = json_number(under_band_deg);
  j["stability_frames"] = stability_frames;
  j["min_message_interval_ms"] = min_message_interval_ms;
  j["critical_bypasses_debounce"] = critical_bypasses_debounce;
  return j;
}

void FeedbackConfig::apply_json(const nlohmann::json& j) {
  delta_deg = j.value("delta_deg", delta_deg);
  optimal_band_deg = j.value("optimal_band_deg", optimal_band_deg);
  under_band_deg = j.value("under_band_deg", under_band_deg);
  stability_frames = j.value("stability_frames", stability_frames);
  min_message_interval_ms = j.value("min_message_interval_ms", min_message_interval_ms);
  critical_bypasses_debounce = j.value("critical_bypasses_debounce", critical_bypasses_debounce);
}

std::string_view state_name(KinematicState s) { return kStateNames[static_cast<std::size_t>(s)]; }

std::optional<KinematicState> state_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == name) return static_cast<KinematicState>(i);
  }
  return std::nullopt;
}

std::string_view severity_name(Severity s) { return kSeverityNames[static_cast<std::size_t>(s)]; }

Severity severity_for(KinematicState s) {
  switch (s) {
    case KinematicState::CriticalViolation:
    case KinematicState::SpatialViolation: return Severity::Stop;
    case KinematicState::HighVelocity: return Severity::Pace;
    case KinematicState::UnderExtension: return Severity::Encourage;
    case KinematicState::Optimal: return Severity::Praise;
    case KinematicState::Approaching:
    case KinematicState::NoData: break;
  }
  return Severity::Silent;
}

nlohmann::ordered_json event_to_json(const FeedbackEvent& e) {
  nlohmann::ordered_json j;
  j["type"] = "event";
  j["frame_id"] = e.frame_id;
  j["t_ms"] = e.t_ms;
  j["state"] = std::string(state_name(e.state));
  j["severity"] = std::string(severity_name(e.severity));
  j["message"] = e.message;
  if (e.theta_deg) j["theta_deg"] = json_number(std::round(*e.theta_deg * 1000.0) / 1000.0);
  if (e.violated_constraint_id) j["violated_constraint_id"] = *e.violated_constraint_id;
  return j;
}

FeedbackEvent event_from_json(const nlohmann::json& j) {
  FeedbackEvent e;
  e.frame_id = j.at("frame_id").get<std::uint64_t>();
  e.t_ms = j.at("t_ms").get<std::int64_t>();
  const auto st = state_from_name(j.at("state").get<std::string>());
  if (!st) throw SchemaViolation("state", "unknown kinematic state");
  e.state = *st;
  e.severity = severity_for(e.state);
  e.message = j.value("message", "");
  if (j.contains("theta_deg")) e.theta_deg = j["theta_deg"].get<double>();
  if (j.contains("violated_constraint_id")) e.violated_constraint_id = j["violated_constraint_id"].get<std::string>();
  return e;
}

KinematicState classify_angle(double theta_deg, const Constraint& constraint, const FeedbackConfig& cfg) {
  if (!constraint.max_angle) throw MissingLimit("constraint " + constraint.constraint_id + " has no max_angle");
  if (!std::isfinite(theta_deg)) return KinematicState::NoData;
  const double a_max = *constraint.max_angle;
  // Strict inequality for the violation, as in the feedback loop's branch.
  if (theta_deg > a_max + cfg.delta_deg) return KinematicState::CriticalViolation;
  if (constraint.min_angle && theta_deg < *constraint.min_angle) return KinematicState::UnderExtension;
  if (theta_deg >= a_max - cfg.optimal_band_deg) return KinematicState::Optimal;
  if (theta_deg >= a_max - cfg.under_band_deg) return KinematicState::Approaching;
  return KinematicState::UnderExtension;
}

std::optional<KinematicState> classify_velocity(const VelocitySample& v, const Constraint& constraint) {
  if (!constraint.max_velocity) return std::nullopt;
  const double magnitude = constraint.axis ? std::fabs(v.omega_deg_s) : v.v_norm;
  if (std::isfinite(magnitude) && magnitude > *constraint.max_velocity) return KinematicState::HighVelocity;
  return std::nullopt;
}

KinematicState resolve(std::span<const KinematicState> states) {
  KinematicState best = KinematicState::NoData;
  for (auto s : states) {
    if (priority(s) > priority(best)) best = s;
  }
  return best;
}

MessageTable MessageTable::from_json(std::string_view text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.contains("messages") || !doc["messages"].is_array()) {
    throw SchemaViolation("messages", "message table needs a messages array");
  }
  MessageTable t;
  for (std::size_t i = 0; i < doc["messages"].size(); ++i) {
    const auto& m = doc["messages"][i];
    const std::string path = "messages[" + std::to_string(i) + "]";
    const auto st = state_from_name(m.value("state", ""));
    if (!st) throw SchemaViolation(path + ".state", "unknown kinematic state");
    if (!m.contains("template") || !m["template"].is_string()) throw SchemaViolation(path + ".template", "missing");
    t.rows_.push_back({*st, m.value("joint", "*"), m["template"].get<std::string>()});
  }
  return t;
}

const MessageTable& MessageTable::builtin() {
  static const MessageTable t = from_json(embedded_data("messages.json"));
  return t;
}

const MessageTable::Row* MessageTable::lookup(KinematicState state, std::string_view joint) const {
  // Most specific first: exact joint, then the side-less base, then "*".
  std::string_view base = joint;
  if (base.starts_with("left_")) base.remove_prefix(5);
  else if (base.starts_with("right_")) base.remove_prefix(6);
  for (std::string_view key : {joint, base, std::string_view("*")}) {
    for (const auto& r : rows_) {
      if (r.state == state && r.joint == key) return &r;
    }
  }
  return nullptr;
}

std::string MessageTable::render(KinematicState state, std::string_view joint, std::optional<double> theta,
                                 std::optional<double> limit) const {
  if (is_silent(state)) return {};
  const Row* row = lookup(state, joint);
  if (!row) return {};
  std::string s = row->tmpl;
  replace_all(s, "{joint}", human_joint(joint == "*" ? "joint" : joint));
  replace_all(s, "{theta}", theta ? format_number(*theta, "%.0f") : std::string("?"));
  replace_all(s, "{limit}", limit ? format_number(*limit, "%g") : std::string("?"));
  return s;
}

std::string render(KinematicState state) { return MessageTable::builtin().render(state); }

std::optional<FeedbackEvent> debounce(const FeedbackEvent& candidate, std::span<const DebounceRecord> history,
                                      const FeedbackConfig& cfg) {
  if (is_silent(candidate.state)) return std::nullopt;
  if (cfg.critical_bypasses_debounce && candidate.state == KinematicState::CriticalViolation) return candidate;

  int run = 1;
  for (auto it = history.rbegin(); it != history.rend() && it->state == candidate.state; ++it) ++run;
  if (run < cfg.stability_frames) return std::nullopt;

  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->emitted && it->state == candidate.state) {
      if (candidate.t_ms - it->t_ms < cfg.min_message_interval_ms) return std::nullopt;
      break;
    }
  }
  return candidate;
}

std::optional<FeedbackEvent> Debouncer::offer(const FeedbackEvent& candidate) {
  const int run = (run_state_ == candidate.state ? run_length_ : 0) + 1;
  run_state_ = candidate.state;
  run_length_ = run;

  const auto idx = static_cast<std::size_t>(candidate.state);
  bool emit = !is_silent(candidate.state);
  const bool bypass = cfg_.critical_bypasses_debounce && candidate.state == KinematicState::CriticalViolation;
  if (emit && !bypass) {
    if (run < cfg_.stability_frames) emit = false;
    else if (last_emit_t_[idx] && candidate.t_ms - *last_emit_t_[idx] < cfg_.min_message_interval_ms) emit = false;
  }
  if (!emit) return std::nullopt;
  last_emit_t_[idx] = candidate.t_ms;
  return candidate;
}

void Debouncer::reset() {
  run_state_.reset();
  run_length_ = 0;
  last_emit_t_ = {};
}

}  // namespace rehab
