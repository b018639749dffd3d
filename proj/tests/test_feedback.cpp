#include "oracles.hpp"

#include "rehab/data.hpp"
#include "rehab/error.hpp"
#include "rehab/feedback.hpp"

#include <doctest.h>

#include <random>

using namespace rehab;

namespace {

Constraint shoulder90() {
  Constraint c;
  c.constraint_id = "shoulder.abduction";
  c.joint = "shoulder";
  c.axis = "abduction";
  c.max_angle = 90.0;
  return c;
}

FeedbackEvent ev(std::uint64_t id, std::int64_t t, KinematicState s) {
  FeedbackEvent e;
  e.frame_id = id;
  e.t_ms = t;
  e.state = s;
  e.severity = severity_for(s);
  e.violated_constraint_id = "c";
  return e;
}

// Runs the pure reference gate over a trace; returns emitted frame indices.
std::vector<std::size_t> run_reference(const std::vector<KinematicState>& states, double fps, const FeedbackConfig& cfg) {
  std::vector<DebounceRecord> hist;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto t = static_cast<std::int64_t>(std::llround(k * 1000.0 / fps));
    const bool emitted = debounce(ev(k, t, states[k]), hist, cfg).has_value();
    if (emitted) out.push_back(k);
    hist.push_back({k, t, states[k], emitted});
  }
  return out;
}

}  // namespace

TEST_SUITE("feedback") {

TEST_CASE("classify_angle examples") {
  const FeedbackConfig cfg;
  const auto c = shoulder90();
  CHECK(classify_angle(96, c, cfg) == KinematicState::CriticalViolation);
  CHECK(classify_angle(85, c, cfg) == KinematicState::Optimal);
  CHECK(classify_angle(70, c, cfg) == KinematicState::UnderExtension);
  CHECK(classify_angle(77, c, cfg) == KinematicState::Approaching);
  CHECK(classify_angle(95, c, cfg) == KinematicState::Optimal);
  CHECK(classify_angle(std::nextafter(95.0, 200.0), c, cfg) == KinematicState::CriticalViolation);
  Constraint none = c;
  none.max_angle.reset();
  CHECK_THROWS_AS(classify_angle(50, none, cfg), MissingLimit);
}

TEST_CASE("0.1 degree sweep matches the band oracle with transitions at 75, 80, 95") {
  const FeedbackConfig cfg;
  const auto c = shoulder90();
  std::vector<std::pair<double, std::string>> transitions;
  std::string prev;
  int rank_prev = -1;
  const std::vector<std::string> order = {"UnderExtension", "Approaching", "Optimal", "CriticalViolation"};
  for (int i = 0; i <= 1800; ++i) {
    const double th = i / 10.0;
    const std::string got(state_name(classify_angle(th, c, cfg)));
    CHECK(got == oracle::band(th, 90.0));
    const auto rank = static_cast<int>(std::find(order.begin(), order.end(), got) - order.begin());
    REQUIRE(rank < 4);
    CHECK(rank >= rank_prev);  // monotone
    rank_prev = rank;
    if (got != prev && !prev.empty()) transitions.emplace_back(th, got);
    prev = got;
  }
  REQUIRE(transitions.size() == 3);
  CHECK(transitions[0].first == doctest::Approx(75.0));
  CHECK(transitions[1].first == doctest::Approx(80.0));
  CHECK(transitions[2].first == doctest::Approx(95.1));  // first sample strictly above 95
}

TEST_CASE("min_angle floor") {
  auto c = shoulder90();
  c.min_angle = 82.0;
  CHECK(classify_angle(81, c, FeedbackConfig{}) == KinematicState::UnderExtension);
  CHECK(classify_angle(85, c, FeedbackConfig{}) == KinematicState::Optimal);
}

TEST_CASE("classify_velocity") {
  Constraint k;
  k.constraint_id = "knee.behind_toe";
  k.joint = "knee";
  k.spatial_rel = "behind_toe";
  k.max_velocity = 0.5;
  VelocitySample v;
  CHECK_FALSE(classify_velocity(v, k));
  v.v_norm = 0.6;
  CHECK(classify_velocity(v, k) == KinematicState::HighVelocity);
  v.v_norm = 0.5;
  CHECK_FALSE(classify_velocity(v, k));

  auto a = shoulder90();
  a.max_velocity = 30.0;
  VelocitySample w;
  w.omega_deg_s = -31.0;
  CHECK(classify_velocity(w, a) == KinematicState::HighVelocity);
  w.omega_deg_s = 30.0;
  CHECK_FALSE(classify_velocity(w, a));
  CHECK_FALSE(classify_velocity(w, shoulder90()));
}

TEST_CASE("resolve agrees with the precedence oracle on all 2^7 subsets") {
  for (unsigned mask = 0; mask < (1u << kStateCount); ++mask) {
    std::vector<KinematicState> present;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < kStateCount; ++i) {
      if (mask & (1u << i)) {
        present.push_back(kAllStates[i]);
        names.emplace_back(state_name(kAllStates[i]));
      }
    }
    const auto got = resolve(present);
    CHECK(std::string(state_name(got)) == oracle::winner(names));
    if (mask & (1u << static_cast<unsigned>(KinematicState::CriticalViolation))) {
      CHECK(got == KinematicState::CriticalViolation);
    }
  }
  const std::vector<KinematicState> ov = {KinematicState::Optimal, KinematicState::HighVelocity};
  CHECK(resolve(ov) == KinematicState::HighVelocity);
}

TEST_CASE("render uses the default coaching strings") {
  CHECK(render(KinematicState::CriticalViolation) == "Warning: Arm is too high. Lower to avoid strain.");
  CHECK(render(KinematicState::Optimal) == "Perfect form. Hold this position.");
  CHECK(render(KinematicState::UnderExtension) == "Raise your arm slightly higher if comfortable.");
  CHECK(render(KinematicState::HighVelocity) == "Slow down your movement to maintain control.");
  CHECK(render(KinematicState::Approaching).empty());
  CHECK(render(KinematicState::NoData).empty());
  const auto& t = MessageTable::builtin();
  CHECK(t.render(KinematicState::SpatialViolation, "knee") == "Keep your knee behind your toes.");
  CHECK(t.render(KinematicState::SpatialViolation, "left_knee") == "Keep your left knee behind your toes.");
  CHECK(t.render(KinematicState::CriticalViolation, "right_shoulder") ==
        "Warning: Arm is too high. Lower to avoid strain.");
}

TEST_CASE("message table placeholders and overrides") {
  const auto t = MessageTable::from_json(R"({"version":1,"messages":[
    {"state":"CriticalViolation","joint":"*","template":"Too far: {theta} over {limit}"},
    {"state":"CriticalViolation","joint":"left_elbow","template":"Left elbow {theta}"}]})");
  CHECK(t.render(KinematicState::CriticalViolation, "shoulder", 96.4, 90.0) == "Too far: 96 over 90");
  CHECK(t.render(KinematicState::CriticalViolation, "left_elbow", 120.0) == "Left elbow 120");
  CHECK(t.render(KinematicState::Optimal, "shoulder").empty());
  CHECK_THROWS_AS(MessageTable::from_json(R"({"messages":[{"state":"Bogus","template":"x"}]})"), SchemaViolation);
}

TEST_CASE("severity mapping") {
  CHECK(severity_for(KinematicState::CriticalViolation) == Severity::Stop);
  CHECK(severity_for(KinematicState::SpatialViolation) == Severity::Stop);
  CHECK(severity_for(KinematicState::HighVelocity) == Severity::Pace);
  CHECK(severity_for(KinematicState::UnderExtension) == Severity::Encourage);
  CHECK(severity_for(KinematicState::Optimal) == Severity::Praise);
  CHECK(severity_for(KinematicState::Approaching) == Severity::Silent);
  CHECK(severity_for(KinematicState::NoData) == Severity::Silent);
}

TEST_CASE("debounce examples") {
  const FeedbackConfig cfg;
  SUBCASE("critical bypass") {
    std::vector<DebounceRecord> hist = {{0, 0, KinematicState::Optimal, false}};
    CHECK(debounce(ev(1, 33, KinematicState::CriticalViolation), hist, cfg));
    FeedbackConfig strict = cfg;
    strict.critical_bypasses_debounce = false;
    CHECK_FALSE(debounce(ev(1, 33, KinematicState::CriticalViolation), hist, strict));
  }
  SUBCASE("alternating Optimal/Approaching never emits") {
    std::vector<KinematicState> trace;
    for (int k = 0; k < 100; ++k) trace.push_back(k % 2 ? KinematicState::Approaching : KinematicState::Optimal);
    CHECK(run_reference(trace, 30.0, cfg).empty());
  }
  SUBCASE("Optimal held 10 frames at 30 FPS emits once in the first second") {
    const std::vector<KinematicState> trace(10, KinematicState::Optimal);
    const auto emitted = run_reference(trace, 30.0, cfg);
    REQUIRE(emitted.size() == 1);
    CHECK(emitted[0] == 2);  // third frame: stable for 3
  }
  SUBCASE("interval gate reopens after a second") {
    const std::vector<KinematicState> trace(61, KinematicState::Optimal);
    const auto emitted = run_reference(trace, 30.0, cfg);
    REQUIRE(emitted.size() == 2);
    CHECK(emitted[1] == 32);  // t = 1067 ms, first sample >= 1000 ms after frame 2 (67 ms)
  }
}

TEST_CASE("Debouncer is equivalent to the reference gate") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pick(0, kStateCount - 1);
  std::uniform_int_distribution<int> stick(0, 9);
  std::uniform_int_distribution<int> gap(1, 120);
  for (int trial = 0; trial < 200; ++trial) {
    FeedbackConfig cfg;
    cfg.stability_frames = 1 + trial % 5;
    cfg.min_message_interval_ms = (trial % 4) * 400;
    cfg.critical_bypasses_debounce = trial % 3 != 0;
    Debouncer d(cfg);
    std::vector<DebounceRecord> hist;
    KinematicState s = KinematicState::NoData;
    std::int64_t t = 0;
    for (std::uint64_t k = 0; k < 400; ++k) {
      if (stick(rng) < 3) s = kAllStates[pick(rng)];
      t += gap(rng);
      const auto cand = ev(k, t, s);
      const auto want = debounce(cand, hist, cfg);
      const auto got = d.offer(cand);
      REQUIRE(want.has_value() == got.has_value());
      if (got) CHECK(*got == cand);
      hist.push_back({k, t, s, want.has_value()});
    }
  }
}

TEST_CASE("event json round trip") {
  auto e = ev(12, 400, KinematicState::CriticalViolation);
  e.message = render(e.state);
  e.theta_deg = 96.25;
  const auto j = event_to_json(e);
  CHECK(j.dump() ==
        R"({"type":"event","frame_id":12,"t_ms":400,"state":"CriticalViolation","severity":"stop","message":"Warning: Arm is too high. Lower to avoid strain.","theta_deg":96.25,"violated_constraint_id":"c"})");
  CHECK(event_from_json(nlohmann::json::parse(j.dump())) == e);
}

TEST_CASE("config check and json") {
  FeedbackConfig c;
  CHECK_NOTHROW(c.check());
  c.optimal_band_deg = 20;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  FeedbackConfig d;
  d.apply_json(nlohmann::json{{"delta_deg", 3}, {"stability_frames", 5}, {"unknown", 1}});
  CHECK(d.delta_deg == 3.0);
  CHECK(d.stability_frames == 5);
  FeedbackConfig e;
  e.apply_json(nlohmann::json::parse(d.to_json().dump()));
  CHECK(e.to_json() == d.to_json());
}

}  // TEST_SUITE
