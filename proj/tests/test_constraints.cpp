#include "rehab/constraints.hpp"
#include "rehab/data.hpp"
#include "rehab/error.hpp"

#include <doctest.h>
#include <json.hpp>

#include <random>

using namespace rehab;
using nlohmann::json;

namespace {

ConstraintSet parse(const std::string& text) { return parse_note({.text = text, .note_id = "n"}); }

Constraint angle_c(std::string id, std::string joint, std::string axis, double max, Urgency u = Urgency::Normal) {
  Constraint c;
  c.constraint_id = std::move(id);
  c.joint = std::move(joint);
  c.axis = std::move(axis);
  c.max_angle = max;
  c.urgency = u;
  return c;
}

Constraint knee_behind_toe() {
  Constraint c;
  c.constraint_id = "knee.behind_toe";
  c.joint = "knee";
  c.spatial_rel = "behind_toe";
  c.max_velocity = 0.5;
  return c;
}

ConstraintSet set_of(std::vector<Constraint> cs) {
  ConstraintSet s;
  s.constraints = std::move(cs);
  s.normalize();
  return s;
}

ConstraintSet random_set(std::mt19937_64& rng) {
  static const std::vector<std::pair<std::string, std::string>> joints = {
      {"shoulder", "abduction"}, {"left_shoulder", "flexion"}, {"elbow", "flexion"},
      {"right_hip", "abduction"}, {"hip", "flexion"},          {"knee", "flexion"}};
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> deg10(10, 1800);
  ConstraintSet s;
  for (const auto& [j, a] : joints) {
    if (!coin(rng)) continue;
    Constraint c;
    c.joint = j;
    c.axis = a;
    c.constraint_id = j + "." + a;
    c.max_angle = deg10(rng) / 10.0;
    if (coin(rng)) c.min_angle = *c.max_angle / 4.0;
    if (coin(rng)) c.max_velocity = deg10(rng) / 7.0;
    c.urgency = coin(rng) ? Urgency::High : Urgency::Normal;
    if (coin(rng)) c.extensions["x_note"] = "ext " + std::to_string(deg10(rng));
    s.constraints.push_back(c);
  }
  if (coin(rng)) s.constraints.push_back(knee_behind_toe());
  if (s.constraints.empty()) s.constraints.push_back(knee_behind_toe());
  s.source_note_id = "note-" + std::to_string(deg10(rng));
  if (coin(rng)) s.residual_text = {"Ice after sessions.", "Walk daily."};
  if (coin(rng)) s.extensions["x_clinic"] = json{{"site", "north"}};
  s.normalize();
  return s;
}

}  // namespace

TEST_SUITE("constraints") {

TEST_CASE("rotator cuff note") {
  const auto s = parse("Patient recovering from rotator cuff tear. Max 90 deg shoulder abduction.");
  REQUIRE(s.constraints.size() == 1);
  const auto& c = s.constraints[0];
  CHECK(c.joint == "shoulder");
  CHECK(c.axis == "abduction");
  CHECK(c.max_angle == 90.0);
  CHECK(c.urgency == Urgency::High);
  CHECK_FALSE(c.spatial_rel);
  CHECK_FALSE(c.max_velocity);
  CHECK(s.residual_text.empty());
}

TEST_CASE("squat note") {
  const auto s = parse("Ensure knee does not track past the toes during squats. Go slow.");
  REQUIRE(s.constraints.size() == 1);
  const auto& c = s.constraints[0];
  CHECK(c.joint == "knee");
  CHECK(c.spatial_rel == "behind_toe");
  CHECK(c.max_velocity == 0.5);
  CHECK(c.urgency == Urgency::Normal);
  CHECK_FALSE(c.axis);
  CHECK_FALSE(c.max_angle);
}

TEST_CASE("parse examples") {
  const auto s = parse("Max 45 deg knee flexion.");
  REQUIRE(s.constraints.size() == 1);
  CHECK(s.constraints[0].joint == "knee");
  CHECK(s.constraints[0].axis == "flexion");
  CHECK(s.constraints[0].max_angle == 45.0);
  CHECK(s.constraints[0].urgency == Urgency::Normal);

  CHECK_THROWS_AS(parse("   "), EmptyNote);
  CHECK_THROWS_AS(parse(""), EmptyNote);
  CHECK_THROWS_AS(parse("Max 90 deg shoulder abduction. Max 60 deg shoulder abduction."), ConflictingConstraints);
}

TEST_CASE("parse tolerates case, symbols and ordering") {
  for (const char* text : {"MAX 90 DEG SHOULDER ABDUCTION", "max 90° shoulder abduction", "Max 90 degrees shoulder abduction",
                           "Shoulder abduction limited to 90 deg", "shoulder abduction up to 90 degrees"}) {
    INFO(text);
    const auto s = parse(text);
    REQUIRE(s.constraints.size() == 1);
    CHECK(s.constraints[0].joint == "shoulder");
    CHECK(s.constraints[0].axis == "abduction");
    CHECK(s.constraints[0].max_angle == 90.0);
  }
}

TEST_CASE("every sentence is either a constraint source or residual") {
  const std::string note =
      "Post-op week 3. Max 100 deg hip flexion. Ice twice a day! Keep the knee behind the toes. "
      "Call the clinic if swelling increases? Go slow.";
  const auto trace = parse_note_traced({.text = note, .note_id = "n"});
  const auto sentences = split_sentences(note);
  REQUIRE(trace.sentences.size() == sentences.size());
  std::size_t residual = 0;
  for (const auto& d : trace.sentences) {
    if (d.kind == SentenceKind::Residual) {
      ++residual;
      CHECK(std::find(trace.set.residual_text.begin(), trace.set.residual_text.end(), d.sentence) !=
            trace.set.residual_text.end());
    } else {
      CHECK_FALSE(d.constraint_ids.empty());
    }
  }
  CHECK(residual == 2);
  CHECK(trace.set.constraints.size() == 2);
  for (const auto& c : trace.set.constraints) CHECK(c.urgency == Urgency::High);
}

TEST_CASE("validate examples") {
  const auto table1 = set_of({angle_c("shoulder.abduction", "shoulder", "abduction", 90, Urgency::High), knee_behind_toe()});
  const auto ok = validate(table1);
  CHECK(ok.ok());
  CHECK(ok.findings.empty());

  const auto r200 = validate(set_of({angle_c("a", "shoulder", "abduction", 200)}));
  CHECK_FALSE(r200.ok());
  REQUIRE(r200.has("angle_out_of_range"));
  CHECK(r200.findings[0].message == "angle out of physiologic range");

  const auto conflict = validate(set_of({angle_c("first", "shoulder", "abduction", 90), angle_c("second", "shoulder", "abduction", 60)}));
  REQUIRE(conflict.has("conflict"));
  for (const auto& f : conflict.findings) {
    if (f.code != "conflict") continue;
    CHECK(f.constraint_ids == std::vector<std::string>{"first", "second"});
  }

  Constraint bare;
  bare.constraint_id = "bare";
  bare.joint = "knee";
  CHECK(validate(set_of({bare})).has("missing_limit"));

  Constraint inverted = angle_c("inv", "knee", "flexion", 40);
  inverted.min_angle = 60;
  CHECK(validate(set_of({inverted})).has("min_not_below_max"));
}

TEST_CASE("conflict detection matches a pairwise scan") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_int_distribution<int> deg(30, 120);
  const std::vector<std::pair<std::string, std::string>> keys = {
      {"shoulder", "abduction"}, {"shoulder", "flexion"}, {"knee", "flexion"}, {"hip", "flexion"}};
  for (int iter = 0; iter < 300; ++iter) {
    ConstraintSet s;
    for (int i = 0; i < 4; ++i) {
      const auto& [j, a] = keys[pick(rng)];
      s.constraints.push_back(angle_c("c" + std::to_string(i), j, a, deg(rng)));
    }
    bool expected = false;
    for (std::size_t i = 0; i < s.constraints.size(); ++i) {
      for (std::size_t k = i + 1; k < s.constraints.size(); ++k) {
        const auto& x = s.constraints[i];
        const auto& y = s.constraints[k];
        if (x.joint == y.joint && x.axis == y.axis && x.max_angle != y.max_angle) expected = true;
      }
    }
    CHECK(validate(s).has("conflict") == expected);
  }
}

TEST_CASE("merge examples") {
  const auto a = set_of({angle_c("shoulder.abduction", "shoulder", "abduction", 90)});
  const auto b = set_of({angle_c("shoulder.abduction", "shoulder", "abduction", 80)});
  const auto m = merge(a, b);
  REQUIRE(m.constraints.size() == 1);
  CHECK(m.constraints[0].max_angle == 80.0);

  const auto k = set_of({knee_behind_toe()});
  CHECK(merge(ConstraintSet{}, k).constraints == k.constraints);

  const auto hi = set_of({angle_c("shoulder.abduction", "shoulder", "abduction", 90, Urgency::High)});
  const auto mh = merge(a, hi);
  REQUIRE(mh.constraints.size() == 1);
  CHECK(mh.constraints[0].urgency == Urgency::High);
}

TEST_CASE("merge is commutative and idempotent") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    const auto x = random_set(rng);
    const auto y = random_set(rng);
    CHECK(merge(x, x) == x);
    CHECK(merge(x, y) == merge(y, x));
  }
}

TEST_CASE("schema round trip") {
  const auto row1 = parse("Patient recovering from rotator cuff tear. Max 90 deg shoulder abduction.");
  const std::string text = to_schema(row1);
  CHECK(text ==
        R"({"schema_version":1,"source_note_id":"n","constraints":[{"constraint_id":"shoulder.abduction","joint":"shoulder","axis":"abduction","max_angle":90,"urgency":"high"}],"residual_text":[]})");
  CHECK(to_schema(parse_schema(text)) == text);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto s = random_set(rng);
    CHECK(parse_schema(to_schema(s)) == s);
  }
}

TEST_CASE("schema violations carry paths") {
  try {
    parse_schema(R"({"constraints":[{"joint":"knee","urgency":"normal"}]})");
    FAIL("expected SchemaViolation");
  } catch (const SchemaViolation& e) {
    CHECK(e.path() == "constraints[0]");
  }
  try {
    parse_schema(R"({"constraints":[{"joint":"knee","max_angle":"ninety"}]})");
    FAIL("expected SchemaViolation");
  } catch (const SchemaViolation& e) {
    CHECK(e.path() == "constraints[0].max_angle");
  }
  CHECK_THROWS_AS(parse_schema(std::string_view("{not json")), SchemaViolation);
  CHECK_THROWS_AS(parse_schema(R"({"schema_version":2,"constraints":[]})"), SchemaViolation);
}

TEST_CASE("unknown fields survive a round trip") {
  const std::string doc =
      R"({"schema_version":1,"source_note_id":"n","constraints":[{"constraint_id":"knee.flexion","joint":"knee","axis":"flexion","max_angle":45,"urgency":"normal","x_reviewed_by":{"name":"dr a"}}],"residual_text":[],"x_site":[1,2]})";
  const auto s = parse_schema(doc);
  CHECK(s.constraints[0].extensions["x_reviewed_by"]["name"] == "dr a");
  CHECK(s.extensions["x_site"] == json::array({1, 2}));
  CHECK(to_schema(s) == doc);
}

TEST_CASE("sanitize drops invalid constraints and collapses conflicts stricter-wins") {
  const auto s = set_of({angle_c("a", "shoulder", "abduction", 90), angle_c("b", "shoulder", "abduction", 60),
                         angle_c("c", "knee", "flexion", 250)});
  ValidationReport r;
  const auto clean = sanitize(s, &r);
  REQUIRE(clean.constraints.size() == 1);
  CHECK(clean.constraints[0].max_angle == 60.0);
  CHECK(r.has("angle_out_of_range"));
}

TEST_CASE("grammar data file is the builtin grammar") {
  const auto g = Grammar::from_json(embedded_data("grammar.json"));
  CHECK(g.version() == 1);
  CHECK(g.pacing_max_velocity() == 0.5);
  CHECK(parse_note({.text = "Max 45 deg knee flexion.", .note_id = "n"}, g) == parse("Max 45 deg knee flexion."));
}

}  // TEST_SUITE
