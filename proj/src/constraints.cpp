#include "rehab/constraints.hpp"

#include "rehab/data.hpp"
#include "rehab/error.hpp"
#include "rehab/kinematics.hpp"
#include "rehab/json_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

namespace rehab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string expand_placeholders(std::string re, const json& placeholders) {
  for (const auto& [name, value] : placeholders.items()) {
    const std::string token = "{" + name + "}";
    const std::string repl = value.get<std::string>();
    for (std::size_t pos = re.find(token); pos != std::string::npos; pos = re.find(token, pos + repl.size())) {
      re.replace(pos, token.size(), repl);
    }
  }
  return re;
}

constexpr auto kRegexFlags = std::regex::ECMAScript | std::regex::optimize;

std::vector<Grammar::Pattern> load_patterns(const json& doc, const char* section,
                                            const json& placeholders) {
  std::vector<Grammar::Pattern> out;
  if (!doc.contains(section)) return out;
  for (std::size_t i = 0; i < doc[section].size(); ++i) {
    const auto& p = doc[section][i];
    const std::string path = std::string(section) + "[" + std::to_string(i) + "]";
    if (!p.contains("regex") || !p.contains("groups")) throw SchemaViolation(path, "pattern needs regex and groups");
    Grammar::Pattern pat;
    pat.id = p.value("id", path);
    try {
      pat.re = std::regex(expand_placeholders(p["regex"].get<std::string>(), placeholders), kRegexFlags);
    } catch (const std::regex_error& e) {
      throw SchemaViolation(path + ".regex", e.what());
    }
    pat.groups = p["groups"].get<std::vector<std::string>>();
    pat.relation = p.value("relation", "");
    out.push_back(std::move(pat));
  }
  return out;
}

std::vector<std::regex> load_regex_list(const json& list) {
  std::vector<std::regex> out;
  for (const auto& r : list) out.emplace_back(r.get<std::string>(), kRegexFlags);
  return out;
}

bool any_match(const std::vector<std::regex>& res, const std::string& s) {
  return std::any_of(res.begin(), res.end(), [&](const std::regex& r) { return std::regex_search(s, r); });
}

std::string make_id(const Constraint& c) {
  if (c.axis) return c.joint + "." + *c.axis;
  if (c.spatial_rel) return c.joint + "." + *c.spatial_rel;
  return c.joint + ".pace";
}

// Field-wise union used while parsing a single note. Equal values are
// duplicates, different values are a contradiction.
void combine_parsed(Constraint& into, const Constraint& from) {
  auto join = [&](std::optional<double>& dst, const std::optional<double>& src, const char* field) {
    if (!src) return;
    if (dst && *dst != *src) {
      throw ConflictingConstraints(into.joint + (into.axis ? " " + *into.axis : std::string()) + ": " +
                                   field + " " + json_number_text(*dst) + " vs " + json_number_text(*src));
    }
    dst = src;
  };
  join(into.max_angle, from.max_angle, "max_angle");
  join(into.min_angle, from.min_angle, "min_angle");
  join(into.max_velocity, from.max_velocity, "max_velocity");
}

template <typename T>
std::optional<T> stricter_min(const std::optional<T>& a, const std::optional<T>& b) {
  if (a && b) return std::min(*a, *b);
  return a ? a : b;
}

template <typename T>
std::optional<T> stricter_max(const std::optional<T>& a, const std::optional<T>& b) {
  if (a && b) return std::max(*a, *b);
  return a ? a : b;
}

// Symmetric: on colliding keys the value with the smaller serialization wins.
json merge_extensions(const json& a, const json& b) {
  json out = a.is_object() ? a : json::object();
  if (!b.is_object()) return out;
  for (const auto& [k, v] : b.items()) {
    if (!out.contains(k) || v.dump() < out[k].dump()) out[k] = v;
  }
  return out;
}

// Stricter-wins combination of two constraints sharing a key.
Constraint combine_strict(const Constraint& a, const Constraint& b) {
  Constraint c = a;
  c.constraint_id = std::min(a.constraint_id, b.constraint_id);
  c.max_angle = stricter_min(a.max_angle, b.max_angle);
  c.min_angle = stricter_max(a.min_angle, b.min_angle);
  c.max_velocity = stricter_min(a.max_velocity, b.max_velocity);
  c.urgency = std::max(a.urgency, b.urgency);
  c.extensions = merge_extensions(a.extensions, b.extensions);
  return c;
}

void fold_into(std::map<std::string, Constraint>& by_key, const Constraint& c) {
  auto [it, inserted] = by_key.emplace(c.key(), c);
  if (!inserted) it->second = combine_strict(it->second, c);
}

bool limits_differ(const Constraint& a, const Constraint& b) {
  return a.max_angle != b.max_angle || a.min_angle != b.min_angle || a.max_velocity != b.max_velocity ||
         a.urgency != b.urgency;
}

struct SentenceMatch {
  std::size_t begin = 0;
  std::size_t end = 0;
  Constraint c;
};

Constraint constraint_from_groups(const Grammar::Pattern& pat, const std::smatch& m) {
  Constraint c;
  std::string side;
  std::string joint;
  for (std::size_t g = 0; g < pat.groups.size() && g + 1 < m.size(); ++g) {
    if (!m[g + 1].matched) continue;
    const std::string v = m[g + 1].str();
    const std::string& role = pat.groups[g];
    if (role == "side") side = v;
    else if (role == "joint") joint = v;
    else if (role == "axis") c.axis = v;
    else if (role == "max") c.max_angle = std::stod(v);
    else if (role == "min") c.min_angle = std::stod(v);
    else if (role == "velocity") c.max_velocity = std::stod(v);
  }
  c.joint = side.empty() ? joint : side + "_" + joint;
  if (!pat.relation.empty()) c.spatial_rel = pat.relation;
  return c;
}

}  // namespace

std::string_view urgency_name(Urgency u) { return u == Urgency::High ? "high" : "normal"; }

std::string Constraint::key() const {
  return joint + "|" + axis.value_or("") + "|" + spatial_rel.value_or("");
}

const Constraint* ConstraintSet::find(std::string_view constraint_id) const {
  for (const auto& c : constraints) {
    if (c.constraint_id == constraint_id) return &c;
  }
  return nullptr;
}

void ConstraintSet::normalize() {
  std::stable_sort(constraints.begin(), constraints.end(), [](const Constraint& a, const Constraint& b) {
    return std::pair(a.key(), a.constraint_id) < std::pair(b.key(), b.constraint_id);
  });
  std::sort(residual_text.begin(), residual_text.end());
  residual_text.erase(std::unique(residual_text.begin(), residual_text.end()), residual_text.end());
}

// --- grammar ----------------------------------------------------------------

Grammar Grammar::from_json(std::string_view text) {
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw SchemaViolation("$", "grammar is not a JSON object");
  Grammar g;
  g.version_ = doc.value("version", 0);
  const json placeholders = doc.value("placeholders", json::object());
  for (const auto& n : doc.value("normalize", json::array())) {
    g.normalizers_.emplace_back(std::regex(n.at("from").get<std::string>(), kRegexFlags),
                                n.at("to").get<std::string>());
  }
  g.range_ = load_patterns(doc, "range_patterns", placeholders);
  g.pace_ = load_patterns(doc, "pace_patterns", placeholders);
  g.angle_ = load_patterns(doc, "angle_patterns", placeholders);
  g.spatial_ = load_patterns(doc, "spatial_patterns", placeholders);
  if (doc.contains("pacing_cues")) {
    g.pacing_velocity_ = doc["pacing_cues"].value("max_velocity", 0.5);
    g.pacing_ = load_regex_list(doc["pacing_cues"].value("patterns", json::array()));
  }
  g.urgency_ = load_regex_list(doc.value("urgency_keywords", json::array()));
  return g;
}

const Grammar& Grammar::builtin() {
  static const Grammar g = from_json(embedded_data("grammar.json"));
  return g;
}

std::string Grammar::normalize(std::string_view sentence) const {
  std::string s(sentence);
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (const auto& [re, to] : normalizers_) s = std::regex_replace(s, re, to);
  s = trim(s);
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' || s.back() == ';')) s.pop_back();
  return trim(s);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    std::string s = trim(text.substr(start, end - start));
    if (!s.empty()) out.push_back(std::move(s));
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '\n' || ch == '\r') {
      flush(i + 1);
      continue;
    }
    const bool terminator = ch == '.' || ch == '!' || ch == '?' || ch == ';';
    const bool at_boundary = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (terminator && at_boundary) flush(i + 1);
  }
  flush(text.size());
  return out;
}

// --- parsing ----------------------------------------------------------------

ParseTrace parse_note_traced(const ClinicalNote& note, const Grammar& grammar) {
  if (trim(note.text).empty()) throw EmptyNote("clinical note is empty");

  ParseTrace trace;
  std::vector<Constraint> found;  // first-appearance order, one per key
  bool urgent = false;
  std::vector<std::size_t> modifier_sentences;

  for (const auto& sentence : split_sentences(note.text)) {
    SentenceDisposition disp;
    disp.sentence = sentence;
    const std::string norm = grammar.normalize(sentence);

    std::vector<SentenceMatch> matches;
    auto overlaps = [&](std::size_t b, std::size_t e) {
      return std::any_of(matches.begin(), matches.end(),
                         [&](const SentenceMatch& m) { return b < m.end && m.begin < e; });
    };
    for (const auto* table : {&grammar.range_patterns(), &grammar.pace_patterns(),
                              &grammar.angle_patterns(), &grammar.spatial_patterns()}) {
      for (const auto& pat : *table) {
        for (auto it = std::sregex_iterator(norm.begin(), norm.end(), pat.re); it != std::sregex_iterator(); ++it) {
          const auto b = static_cast<std::size_t>(it->position(0));
          const auto e = b + static_cast<std::size_t>(it->length(0));
          if (overlaps(b, e)) continue;
          matches.push_back({b, e, constraint_from_groups(pat, *it)});
        }
      }
    }

    for (auto& m : matches) {
      auto it = std::find_if(found.begin(), found.end(), [&](const Constraint& c) { return c.key() == m.c.key(); });
      if (it == found.end()) {
        m.c.constraint_id = make_id(m.c);
        found.push_back(m.c);
        disp.constraint_ids.push_back(m.c.constraint_id);
      } else {
        combine_parsed(*it, m.c);
        disp.constraint_ids.push_back(it->constraint_id);
      }
    }

    const bool is_urgent = any_match(grammar.urgency_keywords(), norm);
    const bool is_pacing = any_match(grammar.pacing_cues(), norm);
    urgent = urgent || is_urgent;
    if (!matches.empty()) {
      disp.kind = SentenceKind::Constraint;
    } else if (is_urgent || is_pacing) {
      disp.kind = SentenceKind::Modifier;
      modifier_sentences.push_back(trace.sentences.size());
    }
    if (is_pacing) disp.constraint_ids.push_back("#pace");
    if (is_urgent) disp.constraint_ids.push_back("#urgent");
    trace.sentences.push_back(std::move(disp));
  }

  // Note-wide modifiers. Urgency elevates every constraint; pacing applies to
  // constraints measured in body-lengths/s (no axis).
  std::vector<std::string> urgent_ids;
  std::vector<std::string> paced_ids;
  const bool pacing = std::any_of(trace.sentences.begin(), trace.sentences.end(), [](const SentenceDisposition& d) {
    return std::find(d.constraint_ids.begin(), d.constraint_ids.end(), "#pace") != d.constraint_ids.end();
  });
  for (auto& c : found) {
    if (urgent) {
      c.urgency = Urgency::High;
      urgent_ids.push_back(c.constraint_id);
    }
    if (pacing && !c.axis) {
      c.max_velocity = stricter_min(c.max_velocity, std::optional<double>(grammar.pacing_max_velocity()));
      paced_ids.push_back(c.constraint_id);
    }
  }

  for (auto& d : trace.sentences) {
    const bool had_pace = std::erase(d.constraint_ids, std::string("#pace")) > 0;
    const bool had_urgent = std::erase(d.constraint_ids, std::string("#urgent")) > 0;
    if (d.kind != SentenceKind::Modifier) continue;
    if (had_pace) d.constraint_ids.insert(d.constraint_ids.end(), paced_ids.begin(), paced_ids.end());
    if (had_urgent) d.constraint_ids.insert(d.constraint_ids.end(), urgent_ids.begin(), urgent_ids.end());
    std::sort(d.constraint_ids.begin(), d.constraint_ids.end());
    d.constraint_ids.erase(std::unique(d.constraint_ids.begin(), d.constraint_ids.end()), d.constraint_ids.end());
    if (d.constraint_ids.empty()) d.kind = SentenceKind::Residual;
  }

  trace.set.source_note_id = note.note_id;
  trace.set.constraints = std::move(found);
  for (const auto& d : trace.sentences) {
    if (d.kind == SentenceKind::Residual) trace.set.residual_text.push_back(d.sentence);
  }
  trace.set.normalize();
  return trace;
}

ConstraintSet parse_note(const ClinicalNote& note, const Grammar& grammar) {
  return parse_note_traced(note, grammar).set;
}

// --- validation ---------------------------------------------------------------

bool ValidationReport::ok() const {
  return std::none_of(findings.begin(), findings.end(),
                      [](const Finding& f) { return f.severity == Finding::Severity::Error; });
}

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(findings.begin(), findings.end(), [&](const Finding& f) { return f.code == code; });
}

ValidationReport validate(const ConstraintSet& set) {
  ValidationReport r;
  auto error = [&](std::string code, std::string msg, std::vector<std::string> ids) {
    r.findings.push_back({Finding::Severity::Error, std::move(code), std::move(msg), std::move(ids)});
  };
  auto warn = [&](std::string code, std::string msg, std::vector<std::string> ids) {
    r.findings.push_back({Finding::Severity::Warning, std::move(code), std::move(msg), std::move(ids)});
  };

  std::set<std::string> seen_ids;
  for (const auto& c : set.constraints) {
    const std::vector<std::string> id{c.constraint_id};
    if (c.constraint_id.empty()) error("missing_id", "constraint has no id", id);
    if (!seen_ids.insert(c.constraint_id).second) error("duplicate_id", "constraint id is not unique", id);
    if (!c.has_limit()) error("missing_limit", "constraint has no limit field", id);

    const auto ref = parse_joint(c.joint);
    if (!ref) error("unknown_joint", "unknown joint '" + c.joint + "'", id);

    auto angle_ok = [](double a, bool allow_zero) {
      return std::isfinite(a) && (allow_zero ? a >= 0.0 : a > 0.0) && a <= 180.0;
    };
    if (c.max_angle && !angle_ok(*c.max_angle, false)) error("angle_out_of_range", "angle out of physiologic range", id);
    if (c.min_angle && !(angle_ok(*c.min_angle, true) && *c.min_angle < 180.0)) {
      error("angle_out_of_range", "angle out of physiologic range", id);
    }
    if (c.min_angle && c.max_angle && !(*c.min_angle < *c.max_angle)) {
      error("min_not_below_max", "min_angle must be below max_angle", id);
    }
    if (c.max_velocity && !(std::isfinite(*c.max_velocity) && *c.max_velocity > 0.0)) {
      error("velocity_out_of_range", "max_velocity must be positive", id);
    }
    if ((c.max_angle || c.min_angle) && !c.axis) error("missing_axis", "angle limit without an axis", id);
    if (c.spatial_rel) {
      try {
        spatial_relation_from_name(*c.spatial_rel);
      } catch (const UnknownRelation&) {
        error("unknown_relation", "unknown spatial relation '" + *c.spatial_rel + "'", id);
      }
    }
    if (ref && c.axis && !catalog_has(ref->base, *c.axis)) {
      warn("unmeasurable_axis", "no measurement defined for " + ref->base + " " + *c.axis, id);
    }
  }

  // Pairwise scan for equal keys.
  for (std::size_t i = 0; i < set.constraints.size(); ++i) {
    for (std::size_t j = i + 1; j < set.constraints.size(); ++j) {
      const auto& a = set.constraints[i];
      const auto& b = set.constraints[j];
      if (a.key() != b.key()) continue;
      if (limits_differ(a, b)) {
        error("conflict", "conflicting limits for the same joint/axis", {a.constraint_id, b.constraint_id});
      } else {
        warn("duplicate_constraint", "duplicate constraint", {a.constraint_id, b.constraint_id});
      }
    }
  }
  return r;
}

ConstraintSet merge(const ConstraintSet& a, const ConstraintSet& b) {
  std::map<std::string, Constraint> by_key;
  for (const auto& c : a.constraints) fold_into(by_key, c);
  for (const auto& c : b.constraints) fold_into(by_key, c);

  ConstraintSet out;
  for (auto& [key, c] : by_key) out.constraints.push_back(std::move(c));
  out.residual_text = a.residual_text;
  out.residual_text.insert(out.residual_text.end(), b.residual_text.begin(), b.residual_text.end());
  if (a.source_note_id.empty() || b.source_note_id.empty() || a.source_note_id == b.source_note_id) {
    out.source_note_id = a.source_note_id.empty() ? b.source_note_id : a.source_note_id;
  } else {
    out.source_note_id = std::min(a.source_note_id, b.source_note_id) + "+" +
                         std::max(a.source_note_id, b.source_note_id);
  }
  out.extensions = merge_extensions(a.extensions, b.extensions);
  out.normalize();
  return out;
}

ConstraintSet sanitize(const ConstraintSet& set, ValidationReport* report) {
  ConstraintSet folded = merge(ConstraintSet{}, set);
  folded.source_note_id = set.source_note_id;
  ValidationReport r = validate(folded);
  std::set<std::string> bad;
  for (const auto& f : r.findings) {
    if (f.severity == Finding::Severity::Error) bad.insert(f.constraint_ids.begin(), f.constraint_ids.end());
  }
  std::erase_if(folded.constraints, [&](const Constraint& c) { return bad.count(c.constraint_id) > 0; });
  if (report) *report = std::move(r);
  return folded;
}

// --- schema -------------------------------------------------------------------

ordered_json constraint_to_json(const Constraint& c) {
  ordered_json j;
  j["constraint_id"] = c.constraint_id;
  j["joint"] = c.joint;
  if (c.axis) j["axis"] = *c.axis;
  if (c.max_angle) j["max_angle"] = json_number(*c.max_angle);
  if (c.min_angle) j["min_angle"] = json_number(*c.min_angle);
  if (c.spatial_rel) j["spatial_rel"] = *c.spatial_rel;
  if (c.max_velocity) j["max_velocity"] = json_number(*c.max_velocity);
  j["urgency"] = std::string(urgency_name(c.urgency));
  if (c.extensions.is_object()) {
    for (const auto& [k, v] : c.extensions.items()) j[k] = v;
  }
  return j;
}

ordered_json to_schema_json(const ConstraintSet& set) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["source_note_id"] = set.source_note_id;
  doc["constraints"] = ordered_json::array();
  for (const auto& c : set.constraints) doc["constraints"].push_back(constraint_to_json(c));
  doc["residual_text"] = set.residual_text;
  if (set.extensions.is_object()) {
    for (const auto& [k, v] : set.extensions.items()) doc[k] = v;
  }
  return doc;
}

std::string to_schema(const ConstraintSet& set) { return to_schema_json(set).dump(); }

ConstraintSet from_schema(const json& doc) {
  if (!doc.is_object()) throw SchemaViolation("$", "document must be an object");
  static const std::set<std::string> kTop = {"schema_version", "source_note_id", "constraints", "residual_text"};
  static const std::set<std::string> kFields = {"constraint_id", "joint",       "axis",        "max_angle",
                                                "min_angle",     "spatial_rel", "max_velocity", "urgency"};
  if (doc.contains("schema_version") && doc["schema_version"] != 1) {
    throw SchemaViolation("schema_version", "unsupported schema version");
  }
  if (!doc.contains("constraints") || !doc["constraints"].is_array()) {
    throw SchemaViolation("constraints", "missing constraints array");
  }

  ConstraintSet set;
  if (doc.contains("source_note_id")) {
    if (!doc["source_note_id"].is_string()) throw SchemaViolation("source_note_id", "expected string");
    set.source_note_id = doc["source_note_id"].get<std::string>();
  }
  if (doc.contains("residual_text")) {
    const auto& rt = doc["residual_text"];
    if (!rt.is_array()) throw SchemaViolation("residual_text", "expected array of strings");
    for (std::size_t i = 0; i < rt.size(); ++i) {
      if (!rt[i].is_string()) throw SchemaViolation("residual_text[" + std::to_string(i) + "]", "expected string");
      set.residual_text.push_back(rt[i].get<std::string>());
    }
  }
  for (const auto& [k, v] : doc.items()) {
    if (!kTop.count(k)) set.extensions[k] = v;
  }

  const auto& arr = doc["constraints"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "constraints[" + std::to_string(i) + "]";
    const auto& cj = arr[i];
    if (!cj.is_object()) throw SchemaViolation(path, "constraint must be an object");
    Constraint c;
    auto str = [&](const char* f) -> std::optional<std::string> {
      if (!cj.contains(f)) return std::nullopt;
      if (!cj[f].is_string()) throw SchemaViolation(path + "." + f, "expected string");
      return cj[f].get<std::string>();
    };
    auto num = [&](const char* f) -> std::optional<double> {
      if (!cj.contains(f)) return std::nullopt;
      if (!cj[f].is_number()) throw SchemaViolation(path + "." + f, "expected number");
      return cj[f].get<double>();
    };
    const auto joint = str("joint");
    if (!joint || joint->empty()) throw SchemaViolation(path + ".joint", "missing joint");
    c.joint = *joint;
    c.axis = str("axis");
    c.max_angle = num("max_angle");
    c.min_angle = num("min_angle");
    c.spatial_rel = str("spatial_rel");
    c.max_velocity = num("max_velocity");
    if (const auto u = str("urgency")) {
      if (*u == "high") c.urgency = Urgency::High;
      else if (*u == "normal") c.urgency = Urgency::Normal;
      else throw SchemaViolation(path + ".urgency", "expected \"high\" or \"normal\"");
    }
    if (!c.has_limit()) throw SchemaViolation(path, "constraint has no limit field");
    c.constraint_id = str("constraint_id").value_or(make_id(c));
    for (const auto& [k, v] : cj.items()) {
      if (!kFields.count(k)) c.extensions[k] = v;
    }
    set.constraints.push_back(std::move(c));
  }
  return set;
}

ConstraintSet parse_schema(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaViolation("$", std::string("not valid JSON: ") + e.what());
  }
  return from_schema(doc);
}

}  // namespace rehab
