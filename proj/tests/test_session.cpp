#include "oracles.hpp"

#include "rehab/error.hpp"
#include "rehab/generator.hpp"
#include "rehab/kinematics.hpp"
#include "rehab/session.hpp"

#include <doctest.h>

#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace rehab;

namespace {

Session make_session(const std::string& text, SessionOptions opts = {}) {
  GrammarExtractionProvider g;
  auto st = phase1({.text = text, .note_id = "t"}, g, std::make_shared<MockSynthesisProvider>());
  return Session(std::move(st), std::move(opts));
}

class BrokenSynthesis final : public SynthesisProvider {
public:
  std::string name() const override { return "broken"; }
  std::string generate(const SynthesisPrompt&) override { throw ProviderUnavailable("renderer offline"); }
};

// Debounce restated from the rule: a non-silent state is spoken once it has
// held for `stable` frames and its last utterance is at least `gap` ms old.
// Critical speaks every frame.
struct OracleEvent {
  std::size_t k;
  std::string state;
};

std::vector<OracleEvent> oracle_events(const std::vector<std::string>& states, const std::vector<std::int64_t>& t,
                                       int stable = 3, std::int64_t gap = 1000) {
  std::vector<OracleEvent> out;
  std::map<std::string, std::int64_t> last;
  int run = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    run = (k > 0 && states[k] == states[k - 1]) ? run + 1 : 1;
    const auto& s = states[k];
    if (s == "Approaching" || s == "NoData") continue;
    if (s != "CriticalViolation") {
      if (run < stable) continue;
      if (auto it = last.find(s); it != last.end() && t[k] - it->second < gap) continue;
    }
    last[s] = t[k];
    out.push_back({k, s});
  }
  return out;
}

struct SineRun {
  std::vector<std::string> engine_states;
  std::vector<std::string> oracle_states;
  std::vector<std::int64_t> t;
  std::vector<OracleEvent> engine_events;
  SessionSummary summary;
};

SineRun run_sine(double peak, int reps) {
  TrajectorySpec spec;
  spec.peak_angle_deg = peak;
  spec.repetitions = reps;
  TrajectoryGenerator gen(spec);
  Session s = make_session("Max 90 deg shoulder abduction.");
  SineRun r;
  for (std::size_t k = 0; !gen.done(); ++k) {
    const auto f = gen.next();
    const auto ev = s.step(f);
    r.t.push_back(f.t_ms);
    r.oracle_states.push_back(oracle::band(oracle::theta(peak, spec.period_ms, static_cast<double>(f.t_ms)), 90.0));
    r.engine_states.emplace_back(state_name(s.log().records().back().state));
    if (ev) r.engine_events.push_back({k, std::string(state_name(ev->state))});
  }
  r.summary = s.summary();
  return r;
}

std::vector<std::string> collapse(const std::vector<OracleEvent>& evs) {
  std::vector<std::string> out;
  for (const auto& e : evs) {
    if (out.empty() || out.back() != e.state) out.push_back(e.state);
  }
  return out;
}

}  // namespace

TEST_SUITE("session") {

TEST_CASE("phase1") {
  GrammarExtractionProvider g;
  SUBCASE("rotator cuff note") {
    const auto st = phase1({.text = "Patient recovering from rotator cuff tear. Max 90 deg shoulder abduction.",
                            .note_id = "n1"},
                           g, std::make_shared<MockSynthesisProvider>());
    REQUIRE(st.constraints.constraints.size() == 1);
    const auto& c = st.constraints.constraints[0];
    CHECK(c.joint == "shoulder");
    CHECK(c.axis == "abduction");
    CHECK(c.max_angle == 90.0);
    CHECK(c.urgency == Urgency::High);
    REQUIRE(st.video_url);
    REQUIRE(st.prompt);
    CHECK(*st.video_url == MockSynthesisProvider().generate(*st.prompt));
    CHECK(st.session_id == "session-n1");
  }
  SUBCASE("empty note refuses to start") {
    CHECK_THROWS_AS(phase1({.text = "", .note_id = "e"}, g, nullptr), NoConstraintsExtracted);
    CHECK_THROWS_AS(phase1({.text = "Patient feels well today.", .note_id = "e"}, g, nullptr),
                    NoConstraintsExtracted);
  }
  SUBCASE("synthesis down is not fatal") {
    const auto st = phase1({.text = "Max 90 deg shoulder abduction.", .note_id = "n"}, g,
                           std::make_shared<BrokenSynthesis>());
    CHECK_FALSE(st.video_url);
    CHECK_FALSE(st.warnings.empty());
    CHECK_NOTHROW(Session{st});
  }
  SUBCASE("no constraints, no session") {
    CHECK_THROWS_AS(Session(PatientState{}), NoConstraintsExtracted);
  }
}

TEST_CASE("first frame past the margin is a critical event") {
  Session s = make_session("Max 90 deg shoulder abduction.");
  auto f = pose_at_angle(TrajectorySpec::default_joint(), 96.0);
  const auto ev = s.step(f);
  REQUIRE(ev);
  CHECK(ev->state == KinematicState::CriticalViolation);
  CHECK(ev->message == "Warning: Arm is too high. Lower to avoid strain.");
  CHECK(ev->theta_deg.value() == doctest::Approx(96.0).epsilon(1e-9));
  CHECK(ev->violated_constraint_id == "shoulder.abduction");
  CHECK(ev->severity == Severity::Stop);
  REQUIRE(s.state().feedback);
  CHECK(s.state().feedback->frame_id == f.frame_id);
}

TEST_CASE("missing landmark gives NoData and silence") {
  Session s = make_session("Max 90 deg shoulder abduction.");
  for (int k = 0; k < 10; ++k) {
    auto f = pose_at_angle(TrajectorySpec::default_joint(), 96.0);
    f.landmarks[static_cast<std::size_t>(LandmarkId::LeftShoulder)].reset();
    f.landmarks[static_cast<std::size_t>(LandmarkId::RightShoulder)].reset();
    f.frame_id = k;
    f.t_ms = k * 33;
    CHECK_FALSE(s.step(f));
  }
  for (const auto& r : s.log().records()) {
    CHECK(r.kind == LogRecord::Kind::Eval);
    CHECK(r.state == KinematicState::NoData);
  }
}

TEST_CASE("stale and fast frames are dropped and logged") {
  Session s = make_session("Max 90 deg shoulder abduction.");
  auto f = pose_at_angle(TrajectorySpec::default_joint(), 85.0);
  f.frame_id = 5;
  f.t_ms = 100;
  s.step(f);
  s.step(f);  // same t_ms
  f.frame_id = 6;
  f.t_ms = 101;  // 1 ms later, above the 120 fps cadence
  s.step(f);
  f.frame_id = 4;
  f.t_ms = 200;  // id goes backwards
  s.step(f);
  const auto& recs = s.log().records();
  REQUIRE(recs.size() == 4);
  CHECK(recs[0].kind == LogRecord::Kind::Eval);
  CHECK(recs[1].reason == "stale_frame");
  CHECK(recs[2].reason == "rate_limit");
  CHECK(recs[3].reason == "stale_frame");
}

TEST_CASE("multiple constraints resolve to the worst") {
  Session s = make_session("Max 90 deg shoulder abduction. Limit knee flexion to 60 degrees.");
  REQUIRE(s.state().constraints.constraints.size() == 2);
  auto f = pose_at_angle(TrajectorySpec::default_joint(), 97.0);
  const auto ev = s.step(f);
  REQUIRE(ev);
  CHECK(ev->state == KinematicState::CriticalViolation);
  CHECK(ev->violated_constraint_id == "shoulder.abduction");
  CHECK(s.log().records().back().states.size() == 2);
}

TEST_CASE("sinusoid against the scripted oracle") {
  for (double peak : {60.0, 90.0, 100.0}) {
    CAPTURE(peak);
    const int reps = 3;
    const auto r = run_sine(peak, reps);
    CHECK(r.engine_states == r.oracle_states);
    const auto want = oracle_events(r.oracle_states, r.t);
    REQUIRE(want.size() == r.engine_events.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(want[i].state == r.engine_events[i].state);
      CHECK(std::llabs(static_cast<long long>(want[i].k) - static_cast<long long>(r.engine_events[i].k)) <= 1);
    }

    std::size_t critical = 0;
    std::set<std::string> kinds;
    for (const auto& e : r.engine_events) {
      kinds.insert(e.state);
      critical += e.state == "CriticalViolation";
    }
    if (peak == 90.0) CHECK(critical == 0);
    if (peak == 100.0) {
      // one or more per repetition
      std::vector<int> per_rep(reps, 0);
      for (const auto& e : r.engine_events) {
        if (e.state == "CriticalViolation") ++per_rep[static_cast<std::size_t>(r.t[e.k] / 4000)];
      }
      for (int n : per_rep) CHECK(n >= 1);
    }
    if (peak == 60.0) CHECK(kinds == std::set<std::string>{"UnderExtension"});
  }
}

TEST_CASE("one rep to 90 speaks UnderExtension, Optimal, UnderExtension") {
  const auto r = run_sine(90.0, 1);
  CHECK(collapse(r.engine_events) == std::vector<std::string>{"UnderExtension", "Optimal", "UnderExtension"});
  CHECK(r.summary.critical_violations == 0);
}

TEST_CASE("dwell matches analytic band occupancy") {
  for (double peak : {60.0, 90.0, 100.0}) {
    CAPTURE(peak);
    const auto r = run_sine(peak, 2);
    const double n = static_cast<double>(r.t.size());
    const double span = n * 1000.0 / 30.0;
    // Integrate band membership of theta(t) on a fine grid.
    std::map<std::string, double> occupancy;
    const double dt = 0.01;
    for (double t = 0.5 * dt; t < span; t += dt) occupancy[oracle::band(oracle::theta(peak, 4000.0, t), 90.0)] += dt;
    std::map<std::string, int> runs;
    for (std::size_t k = 0; k < r.oracle_states.size(); ++k) {
      if (k == 0 || r.oracle_states[k] != r.oracle_states[k - 1]) ++runs[r.oracle_states[k]];
    }
    double total = 0.0;
    for (auto s : kAllStates) {
      const std::string name(state_name(s));
      const double frac = r.summary.dwell[static_cast<std::size_t>(s)];
      total += frac;
      const double analytic_frames = occupancy[name] / span * n;
      CAPTURE(name);
      CHECK(std::fabs(frac * n - analytic_frames) <= runs[name] + 1e-9);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("summaries") {
  CHECK_THROWS_AS(summarize(SessionLog{}), EmptyLog);

  SessionLog drops_only;
  LogRecord drop;
  drop.kind = LogRecord::Kind::Drop;
  drop.reason = "backpressure";
  drops_only.append(drop);
  CHECK_THROWS_AS(summarize(drops_only), EmptyLog);

  TrajectorySpec spec;
  spec.hold_angle_deg = 85.0;
  spec.frame_count = 300;
  Session s = make_session("Max 90 deg shoulder abduction.");
  for (const auto& f : generate(spec)) s.step(f);
  const auto sum = s.summary();
  CHECK(sum.frames_processed == 300);
  CHECK(sum.frames_dropped == 0);
  CHECK(sum.dwell[static_cast<std::size_t>(KinematicState::Optimal)] == 1.0);
  CHECK(sum.critical_violations == 0);
  CHECK(sum.critical_frames == 0);
  CHECK(sum.duration_ms == doctest::Approx(299 * 1000.0 / 30.0).epsilon(0.01));
  CHECK(sum.latency_max_us >= sum.latency_p95_us);
  CHECK(sum.latency_p95_us >= 0.0);
}

TEST_CASE("latency comes from the injected clock") {
  SessionOptions o;
  auto ticks = std::make_shared<std::int64_t>(0);
  o.clock_ns = [ticks] { return (*ticks += 2500); };
  Session s = make_session("Max 90 deg shoulder abduction.", o);
  TrajectorySpec spec;
  spec.frame_count = 20;
  for (const auto& f : generate(spec)) s.step(f);
  const auto sum = s.summary();
  CHECK(sum.latency_mean_us == 2.5);
  CHECK(sum.latency_p95_us == 2.5);
}

TEST_CASE("log lines") {
  Session s = make_session("Max 90 deg shoulder abduction.");
  auto f = pose_at_angle(TrajectorySpec::default_joint(), 96.0);
  s.step(f);
  s.record_drop(std::nullopt, std::nullopt, "malformed_record", "bad json");
  std::ostringstream out;
  s.log().write_ndjson(out);
  std::istringstream in(out.str());
  std::string a, b, extra;
  REQUIRE(std::getline(in, a));
  REQUIRE(std::getline(in, b));
  CHECK_FALSE(std::getline(in, extra));
  const auto ja = nlohmann::json::parse(a);
  CHECK(ja["type"] == "eval");
  CHECK(ja["state"] == "CriticalViolation");
  CHECK(ja["event"]["type"] == "event");
  CHECK(ja["angles"]["shoulder.abduction"].get<double>() == doctest::Approx(96.0));
  CHECK(b == R"({"type":"drop","frame_id":null,"t_ms":null,"reason":"malformed_record","detail":"bad json"})");
  CHECK(s.log().event_log().find("Warning: Arm is too high.") != std::string::npos);
}

TEST_CASE("fuzzed frames never crash and are always logged") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  std::uniform_int_distribution<int> pick(0, 9);
  Session s = make_session("Max 90 deg shoulder abduction. Keep knee behind toes. Limit knee flexion to 60 degrees.");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::int64_t t = 0;
  std::uint64_t id = 0;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) {
    PoseFrame f = neutral_pose();
    for (auto& slot : f.landmarks) {
      switch (pick(rng)) {
        case 0: slot.reset(); break;
        case 1: slot->x = nan; break;
        case 2: slot->x = u(rng); slot->y = u(rng); break;
        case 3: slot->visibility = u(rng); break;
        case 4: slot->z = pick(rng) == 0 ? std::numeric_limits<double>::infinity() : u(rng); break;
        default: break;
      }
    }
    // mostly forward, sometimes repeated or backwards
    const int mode = pick(rng);
    if (mode == 0) t -= 5;
    else if (mode != 1) t += 1 + pick(rng) * 7;
    id += mode == 0 ? 0 : 1;
    f.t_ms = t;
    f.frame_id = id;
    CHECK_NOTHROW(s.step(f));
  }
  const auto& recs = s.log().records();
  CHECK(recs.size() == n);
  std::optional<std::uint64_t> prev;
  std::size_t drops = 0;
  for (const auto& r : recs) {
    if (r.kind == LogRecord::Kind::Drop) {
      ++drops;
      CHECK_FALSE(r.reason.empty());
      continue;
    }
    if (prev) CHECK(*r.frame_id > *prev);
    prev = r.frame_id;
  }
  CHECK(drops > 0);
  CHECK(drops < n);
}

}  // TEST_SUITE
