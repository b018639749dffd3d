#include "rehab/session.hpp"

#include "rehab/error.hpp"
#include "rehab/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace rehab {

namespace {

using nlohmann::ordered_json;

std::int64_t steady_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::int64_t wall_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

bool frame_is_sane(const PoseFrame& f, std::string& why) {
  for (const auto& lm : f.landmarks) {
    if (!lm) continue;
    const bool ok = std::isfinite(lm->x) && std::isfinite(lm->y) && std::isfinite(lm->z) &&
                    lm->x >= 0.0 && lm->x <= 1.0 && lm->y >= 0.0 && lm->y <= 1.0 && lm->visibility >= 0.0 &&
                    lm->visibility <= 1.0;
    if (!ok) {
      why = std::string(landmark_name(lm->id)) + " has non-finite or out-of-range values";
      return false;
    }
  }
  return true;
}

template <typename T>
void prune(std::deque<T>& hist, std::int64_t now, std::int64_t keep_ms) {
  while (!hist.empty() && now - hist.front().t_ms > keep_ms) hist.pop_front();
}

std::string human_finding(const Finding& f) {
  std::string ids;
  for (const auto& id : f.constraint_ids) ids += (ids.empty() ? "" : ",") + id;
  return f.code + " [" + ids + "]: " + f.message;
}

}  // namespace

// --- phase 1 -----------------------------------------------------------------

PatientState phase1_with_constraints(const ClinicalNote& note, const ConstraintSet& constraints,
                                     std::shared_ptr<SynthesisProvider> synthesis, const Phase1Options& opts) {
  PatientState s;
  s.notes = note;
  s.started_at_ms = wall_now_ms();
  s.session_id = opts.session_id.empty() ? "session-" + (note.note_id.empty() ? "anon" : note.note_id) : opts.session_id;

  // Generated or hand-written constraints pass the same safety gate.
  ValidationReport report;
  s.constraints = sanitize(constraints, &report);
  for (const auto& f : report.findings) s.warnings.push_back("constraint " + human_finding(f));
  if (s.constraints.empty()) throw NoConstraintsExtracted("no usable constraints in note '" + note.note_id + "'");

  try {
    const auto& tmpl = opts.prompt_template ? *opts.prompt_template : PromptTemplate::builtin();
    s.prompt = build_prompt(s.constraints, tmpl, opts.safety_margin_deg);
    s.video_url = synthesize(*s.prompt, std::move(synthesis), opts.synthesis_timeout);
  } catch (const NoRenderableConstraint& e) {
    s.warnings.push_back(std::string("synthesis skipped: ") + e.what());
  } catch (const ProviderUnavailable& e) {
    s.warnings.push_back(std::string("synthesis unavailable: ") + e.what());
  }
  return s;
}

PatientState phase1(const ClinicalNote& note, ExtractionProvider& extraction,
                    std::shared_ptr<SynthesisProvider> synthesis, const Phase1Options& opts) {
  ConstraintSet extracted;
  try {
    extracted = extraction.extract(note);
  } catch (const EmptyNote& e) {
    throw NoConstraintsExtracted(std::string("nothing to extract: ") + e.what());
  }
  PatientState s = phase1_with_constraints(note, extracted, std::move(synthesis), opts);
  for (const auto& r : extracted.residual_text) s.warnings.push_back("unparsed: " + r);
  return s;
}

// --- log ---------------------------------------------------------------------

ordered_json log_record_to_json(const LogRecord& r) {
  ordered_json j;
  if (r.kind == LogRecord::Kind::Drop) {
    j["type"] = "drop";
    j["frame_id"] = r.frame_id ? ordered_json(*r.frame_id) : ordered_json(nullptr);
    j["t_ms"] = r.t_ms ? ordered_json(*r.t_ms) : ordered_json(nullptr);
    j["reason"] = r.reason;
    j["detail"] = r.detail;
    return j;
  }
  j["type"] = "eval";
  j["frame_id"] = r.frame_id.value_or(0);
  j["t_ms"] = r.t_ms.value_or(0);
  j["state"] = std::string(state_name(r.state));
  j["angles"] = ordered_json::object();
  for (const auto& [id, theta] : r.angles) j["angles"][id] = json_number(round3(theta));
  j["states"] = ordered_json::object();
  for (const auto& [id, st] : r.states) j["states"][id] = std::string(state_name(st));
  j["event"] = r.event ? event_to_json(*r.event) : ordered_json(nullptr);
  j["latency_us"] = round3(r.latency_us);
  return j;
}

void SessionLog::write_ndjson(std::ostream& out) const {
  for (const auto& r : records_) {
    out << log_record_to_json(r).dump(-1, ' ', false, ordered_json::error_handler_t::replace) << '\n';
  }
}

std::string SessionLog::event_log() const {
  std::string out;
  for (const auto& r : records_) {
    if (r.kind == LogRecord::Kind::Eval && r.event) out += event_to_json(*r.event).dump() + "\n";
  }
  return out;
}

ordered_json SessionSummary::to_json(bool include_timing) const {
  ordered_json j;
  j["type"] = "summary";
  j["duration_ms"] = json_number(duration_ms);
  j["frames_processed"] = frames_processed;
  j["frames_dropped"] = frames_dropped;
  j["events_emitted"] = events_emitted;
  j["critical_violations"] = critical_violations;
  j["critical_frames"] = critical_frames;
  j["dwell"] = ordered_json::object();
  for (auto s : kAllStates) j["dwell"][std::string(state_name(s))] = dwell[static_cast<std::size_t>(s)];
  if (include_timing) {
    j["latency_us"] = {{"mean", round3(latency_mean_us)}, {"p95", round3(latency_p95_us)}, {"max", round3(latency_max_us)}};
  }
  return j;
}

SessionSummary summarize(const SessionLog& log) {
  SessionSummary s;
  std::vector<double> latencies;
  std::array<std::size_t, kStateCount> counts{};
  std::optional<std::int64_t> first_t;
  std::optional<std::int64_t> last_t;
  for (const auto& r : log.records()) {
    if (r.kind == LogRecord::Kind::Drop) {
      ++s.frames_dropped;
      continue;
    }
    ++s.frames_processed;
    ++counts[static_cast<std::size_t>(r.state)];
    latencies.push_back(r.latency_us);
    if (r.state == KinematicState::CriticalViolation) ++s.critical_frames;
    if (r.event) {
      ++s.events_emitted;
      if (r.event->state == KinematicState::CriticalViolation) ++s.critical_violations;
    }
    if (!first_t) first_t = r.t_ms;
    last_t = r.t_ms;
  }
  if (s.frames_processed == 0) throw EmptyLog("session log has no processed frames");

  const auto n = static_cast<double>(s.frames_processed);
  for (std::size_t i = 0; i < kStateCount; ++i) s.dwell[i] = static_cast<double>(counts[i]) / n;
  s.duration_ms = static_cast<double>(*last_t - *first_t);

  std::sort(latencies.begin(), latencies.end());
  double sum = 0.0;
  for (double l : latencies) sum += l;
  s.latency_mean_us = sum / n;
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
  s.latency_p95_us = latencies[std::max<std::size_t>(rank, 1) - 1];
  s.latency_max_us = latencies.back();
  return s;
}

// --- session -----------------------------------------------------------------

struct SideProbe {
  Side side = Side::Left;
  std::optional<JointDef> def;
  LandmarkId tracked = LandmarkId::LeftWrist;
  std::deque<JointAngleSample> angle_hist;
  std::deque<TimedPoint> point_hist;
};

struct Session::Plan {
  Constraint c;
  std::optional<SpatialRelation> relation;
  bool joint_known = false;
  std::vector<SideProbe> sides;
};

Session::Session(PatientState state, SessionOptions opts)
    : state_(std::move(state)),
      opts_(std::move(opts)),
      debouncer_(opts_.feedback),
      messages_(opts_.messages) {
  if (state_.constraints.empty()) throw NoConstraintsExtracted("session needs at least one constraint");
  opts_.feedback.check();
  if (!opts_.clock_ns) opts_.clock_ns = steady_now_ns;
  if (!messages_) messages_ = std::shared_ptr<const MessageTable>(&MessageTable::builtin(), [](const MessageTable*) {});

  for (const auto& c : state_.constraints.constraints) {
    Plan p;
    p.c = c;
    if (c.spatial_rel) {
      try {
        p.relation = spatial_relation_from_name(*c.spatial_rel);
      } catch (const UnknownRelation&) {
      }
    }
    if (const auto ref = parse_joint(c.joint)) {
      p.joint_known = true;
      std::vector<Side> sides = ref->side ? std::vector<Side>{*ref->side} : std::vector<Side>{Side::Left, Side::Right};
      for (Side side : sides) {
        SideProbe probe;
        probe.side = side;
        if (c.axis) probe.def = catalog_joint_def(ref->base, *c.axis, side, opts_.kinematics.use_plane_projection);
        probe.tracked = tracked_landmark(ref->base, side);
        p.sides.push_back(std::move(probe));
      }
    }
    plans_.push_back(std::move(p));
  }
}

Session::~Session() = default;
Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;

void Session::record_drop(std::optional<std::uint64_t> frame_id, std::optional<std::int64_t> t_ms, std::string reason,
                          std::string detail) {
  LogRecord r;
  r.kind = LogRecord::Kind::Drop;
  r.frame_id = frame_id;
  r.t_ms = t_ms;
  r.reason = std::move(reason);
  r.detail = std::move(detail);
  log_.append(std::move(r));
}

std::optional<FeedbackEvent> Session::step(const PoseFrame& frame) {
  const std::int64_t t0 = opts_.clock_ns();

  if ((last_t_ms_ && frame.t_ms <= *last_t_ms_) || (last_frame_id_ && frame.frame_id <= *last_frame_id_)) {
    record_drop(frame.frame_id, frame.t_ms, "stale_frame", "frame_id/t_ms not after the last processed frame");
    return std::nullopt;
  }
  if (std::string why; !frame_is_sane(frame, why)) {
    record_drop(frame.frame_id, frame.t_ms, "invalid_frame", why);
    return std::nullopt;
  }
  if (last_t_ms_ && opts_.max_eval_fps > 0.0 &&
      static_cast<double>(frame.t_ms - *last_t_ms_) < 1000.0 / opts_.max_eval_fps) {
    record_drop(frame.frame_id, frame.t_ms, "rate_limit", "faster than the evaluation cadence");
    return std::nullopt;
  }
  last_t_ms_ = frame.t_ms;
  last_frame_id_ = frame.frame_id;

  const auto& kc = opts_.kinematics;
  LogRecord rec;
  rec.frame_id = frame.frame_id;
  rec.t_ms = frame.t_ms;

  std::vector<JointAngleSample> pose_angles;
  std::vector<VelocitySample> pose_velocities;
  std::vector<KinematicState> plan_states(plans_.size(), KinematicState::NoData);
  std::vector<std::optional<double>> plan_theta(plans_.size());

  for (std::size_t pi = 0; pi < plans_.size(); ++pi) {
    Plan& p = plans_[pi];
    const Constraint& c = p.c;
    std::vector<KinematicState> comps;

    // angle
    std::optional<double> theta;
    for (auto& probe : p.sides) {
      if (!probe.def) continue;
      const auto m = try_measure_joint(frame, *probe.def, kc.visibility_floor);
      if (m.status != MeasureStatus::Ok) continue;
      JointAngleSample sample{probe.def->joint, probe.def->axis, m.theta_deg, frame.t_ms, m.confidence};
      probe.angle_hist.push_back(sample);
      prune(probe.angle_hist, frame.t_ms, kc.history_ms);
      pose_angles.push_back(std::move(sample));
      theta = theta ? std::max(*theta, m.theta_deg) : m.theta_deg;
    }
    if (c.max_angle && theta) comps.push_back(classify_angle(*theta, c, opts_.feedback));

    // spatial relation: worst side governs
    if (p.relation) {
      std::optional<SpatialResult> worst;
      for (const auto& probe : p.sides) {
        try {
          const auto r = eval_spatial_relation(frame, *p.relation, probe.side, kc.visibility_floor);
          if (!worst || r.margin_norm > worst->margin_norm) worst = r;
        } catch (const MeasurementError&) {
        }
      }
      if (worst) {
        if (!worst->satisfied) comps.push_back(KinematicState::SpatialViolation);
        else if (!c.max_angle) comps.push_back(KinematicState::Optimal);
      }
    }

    // velocity
    if (c.max_velocity) {
      std::optional<VelocitySample> fastest;
      std::optional<double> blen;
      for (auto& probe : p.sides) {
        VelocitySample v;
        bool have = false;
        if (c.axis) {
          if (probe.angle_hist.size() >= 2 && probe.angle_hist.back().t_ms == frame.t_ms) {
            try {
              const std::vector<JointAngleSample> hist(probe.angle_hist.begin(), probe.angle_hist.end());
              v = angular_velocity(hist, kc.velocity_window_ms, kc.ema_alpha);
              have = true;
            } catch (const InsufficientHistory&) {
            }
          }
        } else {
          const auto& lm = frame.at(probe.tracked);
          if (lm && lm->visibility >= kc.visibility_floor) {
            probe.point_hist.push_back({frame.t_ms, lm->position()});
            prune(probe.point_hist, frame.t_ms, kc.history_ms);
            try {
              if (!blen) blen = body_length(frame, kc.visibility_floor);
              const std::vector<TimedPoint> hist(probe.point_hist.begin(), probe.point_hist.end());
              v.joint = std::string(landmark_name(probe.tracked));
              v.v_norm = landmark_speed(hist, kc.velocity_window_ms, kc.ema_alpha) / *blen;
              v.t_ms = frame.t_ms;
              have = true;
            } catch (const InsufficientHistory&) {
            } catch (const MeasurementError&) {
            }
          }
        }
        if (!have) continue;
        const double mag = c.axis ? std::fabs(v.omega_deg_s) : v.v_norm;
        const double best = fastest ? (c.axis ? std::fabs(fastest->omega_deg_s) : fastest->v_norm) : -1.0;
        if (mag > best) fastest = v;
        pose_velocities.push_back(v);
      }
      if (fastest) {
        if (auto hv = classify_velocity(*fastest, c)) comps.push_back(*hv);
        else if (comps.empty() && !c.max_angle && !p.relation) comps.push_back(KinematicState::Optimal);
      }
    }

    plan_states[pi] = resolve(comps);
    plan_theta[pi] = theta;
    if (theta) rec.angles.emplace_back(c.constraint_id, *theta);
    rec.states.emplace_back(c.constraint_id, plan_states[pi]);
  }

  const KinematicState frame_state = resolve(plan_states);
  std::size_t winner = 0;
  for (std::size_t pi = 0; pi < plans_.size(); ++pi) {
    if (plan_states[pi] == frame_state) {
      winner = pi;
      break;
    }
  }
  const Constraint& wc = plans_[winner].c;

  FeedbackEvent candidate;
  candidate.frame_id = frame.frame_id;
  candidate.t_ms = frame.t_ms;
  candidate.state = frame_state;
  candidate.severity = severity_for(frame_state);
  candidate.theta_deg = plan_theta[winner];
  candidate.violated_constraint_id = wc.constraint_id;
  std::optional<double> limit = frame_state == KinematicState::HighVelocity ? wc.max_velocity : wc.max_angle;
  candidate.message = messages_->render(frame_state, wc.joint, candidate.theta_deg, limit);

  // Classification is final here; only phrasing came from the message table.
  auto emitted = debouncer_.offer(candidate);

  state_.pose_frame_id = frame.frame_id;
  state_.angles = std::move(pose_angles);
  state_.velocities = std::move(pose_velocities);
  if (emitted) state_.feedback = emitted;

  rec.state = frame_state;
  rec.event = emitted;
  rec.latency_us = static_cast<double>(opts_.clock_ns() - t0) / 1000.0;
  log_.append(std::move(rec));
  return emitted;
}

}  // namespace rehab
