#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rehab {

// Every failure the engine reports carries a stable machine code (used in
// protocol error records and CLI diagnostics) next to the human message.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

#define REHAB_DEFINE_ERROR(Name, code_str)                                    \
  class Name : public Error {                                                 \
  public:                                                                     \
    explicit Name(const std::string& what) : Error(code_str, what) {}        \
  }

// kinematics
REHAB_DEFINE_ERROR(InsufficientHistory, "insufficient_history");
REHAB_DEFINE_ERROR(UnknownRelation, "unknown_relation");

// A frame could not be measured. The session turns these into NoData.
class MeasurementError : public Error {
public:
  using Error::Error;
};

class DegenerateVector : public MeasurementError {
public:
  explicit DegenerateVector(const std::string& what) : MeasurementError("degenerate_vector", what) {}
};

class MissingLandmark : public MeasurementError {
public:
  MissingLandmark(std::string landmark, const std::string& what)
      : MeasurementError("missing_landmark", what), landmark_(std::move(landmark)) {}
  const std::string& landmark() const noexcept { return landmark_; }

private:
  std::string landmark_;
};

class LowConfidence : public MeasurementError {
public:
  LowConfidence(std::string landmark, double visibility, const std::string& what)
      : MeasurementError("low_confidence", what), landmark_(std::move(landmark)), visibility_(visibility) {}
  const std::string& landmark() const noexcept { return landmark_; }
  double visibility() const noexcept { return visibility_; }

private:
  std::string landmark_;
  double visibility_;
};

// constraints
REHAB_DEFINE_ERROR(EmptyNote, "empty_note");
REHAB_DEFINE_ERROR(ConflictingConstraints, "conflicting_constraints");

class SchemaViolation : public Error {
public:
  SchemaViolation(std::string path, const std::string& what)
      : Error("schema_violation", path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

// feedback
REHAB_DEFINE_ERROR(MissingLimit, "missing_limit");

// synthesis
REHAB_DEFINE_ERROR(NoRenderableConstraint, "no_renderable_constraint");
REHAB_DEFINE_ERROR(ProviderUnavailable, "provider_unavailable");

// session
REHAB_DEFINE_ERROR(NoConstraintsExtracted, "no_constraints_extracted");
REHAB_DEFINE_ERROR(StaleFrame, "stale_frame");
REHAB_DEFINE_ERROR(EmptyLog, "empty_log");

// ingest
REHAB_DEFINE_ERROR(UnknownLandmark, "unknown_landmark");
REHAB_DEFINE_ERROR(RangeViolation, "range_violation");
REHAB_DEFINE_ERROR(FileUnreadable, "file_unreadable");
REHAB_DEFINE_ERROR(BindFailure, "bind_failure");

class MalformedRecord : public Error {
public:
  MalformedRecord(std::size_t byte_offset, const std::string& what, std::size_t line = 0)
      : Error("malformed_record", what), byte_offset_(byte_offset), line_(line) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }
  // 1-based line number when decoding a file, 0 otherwise.
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t byte_offset_;
  std::size_t line_;
};

#undef REHAB_DEFINE_ERROR

}  // namespace rehab
