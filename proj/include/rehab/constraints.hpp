#pragma once

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace rehab {

struct ClinicalNote {
  std::string text;
  std::string note_id;
};

enum class Urgency : std::uint8_t { Normal = 0, High = 1 };

std::string_view urgency_name(Urgency u);

// One kinematic limit. max_velocity is deg/s when `axis` is set and
// body-lengths/s otherwise.
struct Constraint {
  std::string constraint_id;
  std::string joint;
  std::optional<std::string> axis;
  std::optional<double> max_angle;
  std::optional<double> min_angle;
  std::optional<std::string> spatial_rel;
  std::optional<double> max_velocity;
  Urgency urgency = Urgency::Normal;
  // Unknown schema fields, preserved verbatim for forward compatibility.
  nlohmann::json extensions = nlohmann::json::object();

  bool has_limit() const {
    return max_angle.has_value() || min_angle.has_value() || spatial_rel.has_value() ||
           max_velocity.has_value();
  }
  // Identity for merge and conflict detection: joint|axis|spatial_rel.
  std::string key() const;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

struct ConstraintSet {
  std::vector<Constraint> constraints;
  std::vector<std::string> residual_text;
  std::string source_note_id;
  nlohmann::json extensions = nlohmann::json::object();

  bool empty() const { return constraints.empty(); }
  const Constraint* find(std::string_view constraint_id) const;
  // Constraints sorted by key, residual text sorted and de-duplicated.
  void normalize();

  friend bool operator==(const ConstraintSet&, const ConstraintSet&) = default;
};

// --- grammar -------------------------------------------------------------

// Pattern table loaded from the versioned grammar data file.
class Grammar {
public:
  struct Pattern {
    std::string id;
    std::regex re;
    std::vector<std::string> groups;  // role per capture group
    std::string relation;             // spatial patterns only
  };

  static Grammar from_json(std::string_view text);
  static const Grammar& builtin();

  int version() const { return version_; }
  std::string normalize(std::string_view sentence) const;

  const std::vector<Pattern>& range_patterns() const { return range_; }
  const std::vector<Pattern>& pace_patterns() const { return pace_; }
  const std::vector<Pattern>& angle_patterns() const { return angle_; }
  const std::vector<Pattern>& spatial_patterns() const { return spatial_; }
  const std::vector<std::regex>& pacing_cues() const { return pacing_; }
  double pacing_max_velocity() const { return pacing_velocity_; }
  const std::vector<std::regex>& urgency_keywords() const { return urgency_; }

private:
  int version_ = 0;
  std::vector<std::pair<std::regex, std::string>> normalizers_;
  std::vector<Pattern> range_, pace_, angle_, spatial_;
  std::vector<std::regex> pacing_;
  double pacing_velocity_ = 0.5;
  std::vector<std::regex> urgency_;
};

enum class SentenceKind : std::uint8_t { Constraint, Modifier, Residual };

struct SentenceDisposition {
  std::string sentence;
  SentenceKind kind = SentenceKind::Residual;
  std::vector<std::string> constraint_ids;  // constraints this sentence created or modified
};

struct ParseTrace {
  ConstraintSet set;
  std::vector<SentenceDisposition> sentences;
};

std::vector<std::string> split_sentences(std::string_view text);

// Throws EmptyNote, ConflictingConstraints.
ParseTrace parse_note_traced(const ClinicalNote& note, const Grammar& grammar = Grammar::builtin());
ConstraintSet parse_note(const ClinicalNote& note, const Grammar& grammar = Grammar::builtin());

// --- validation / merge / schema ------------------------------------------

struct Finding {
  enum class Severity : std::uint8_t { Error, Warning };
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  std::vector<std::string> constraint_ids;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const;  // no Error-severity findings
  bool has(std::string_view code) const;
};

ValidationReport validate(const ConstraintSet& set);

// Union; on equal key the stricter limit wins and urgency is the max.
ConstraintSet merge(const ConstraintSet& a, const ConstraintSet& b);

// Drops constraints carrying Error findings and collapses equal-key
// conflicts stricter-wins. Returns the surviving set.
ConstraintSet sanitize(const ConstraintSet& set, ValidationReport* report = nullptr);

nlohmann::ordered_json to_schema_json(const ConstraintSet& set);
// Canonical compact UTF-8 JSON text.
std::string to_schema(const ConstraintSet& set);
// Throws SchemaViolation carrying the offending field path.
ConstraintSet from_schema(const nlohmann::json& doc);
ConstraintSet parse_schema(std::string_view text);

nlohmann::ordered_json constraint_to_json(const Constraint& c);

// --- providers -------------------------------------------------------------

class ExtractionProvider {
public:
  virtual ~ExtractionProvider() = default;
  virtual std::string name() const = 0;
  virtual ConstraintSet extract(const ClinicalNote& note) = 0;
};

class GrammarExtractionProvider final : public ExtractionProvider {
public:
  GrammarExtractionProvider() : grammar_(&Grammar::builtin()) {}
  explicit GrammarExtractionProvider(std::shared_ptr<const Grammar> grammar)
      : owned_(std::move(grammar)), grammar_(owned_.get()) {}

  std::string name() const override { return "grammar"; }
  ConstraintSet extract(const ClinicalNote& note) override { return parse_note(note, *grammar_); }

private:
  std::shared_ptr<const Grammar> owned_;
  const Grammar* grammar_;
};

}  // namespace rehab
