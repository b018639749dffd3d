#include "rehab/ingest.hpp"

#include "rehab/data.hpp"
#include "rehab/error.hpp"

#include <chrono>
#include <istream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rehab {

Session session_from_open(const OpenRecord& open, const EngineConfig& cfg) {
  SessionOptions sopts = cfg.session;
  if (open.feedback_config) {
    try {
      sopts.feedback.apply_json(*open.feedback_config);
      sopts.feedback.check();
    } catch (const std::exception& e) {
      throw RangeViolation(std::string("feedback_config: ") + e.what());
    }
  }
  auto synthesis = cfg.synthesis ? cfg.synthesis : std::make_shared<MockSynthesisProvider>();
  ClinicalNote note{.text = open.note.value_or(""), .note_id = open.note_id};

  PatientState state;
  if (open.constraints) {
    state = phase1_with_constraints(note, *open.constraints, synthesis, cfg.phase1);
  } else {
    GrammarExtractionProvider grammar;
    ExtractionProvider& extraction = cfg.extraction ? *cfg.extraction : grammar;
    state = phase1(note, extraction, synthesis, cfg.phase1);
  }
  return Session(std::move(state), std::move(sopts));
}

namespace {

std::optional<std::uint64_t> peek_frame_id(const nlohmann::json& j) {
  if (j.contains("frame_id") && j["frame_id"].is_number_unsigned()) return j["frame_id"].get<std::uint64_t>();
  return std::nullopt;
}

std::optional<std::int64_t> peek_t_ms(const nlohmann::json& j) {
  if (j.contains("t_ms") && j["t_ms"].is_number_integer()) return j["t_ms"].get<std::int64_t>();
  return std::nullopt;
}

}  // namespace

Recording read_recording(std::istream& in, const LandmarkMapping* mapping) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Recording rec;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t nl = text.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    std::string_view line(text.data() + pos, (terminated ? nl : text.size()) - pos);
    const std::size_t line_start = pos;
    pos = terminated ? nl + 1 : text.size();
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    try {
      const auto j = parse_record(line);
      const std::string type = j.contains("type") && j["type"].is_string() ? j["type"].get<std::string>() : "";
      if (type == "open") {
        if (rec.open || !rec.items.empty()) throw MalformedRecord(0, "open record must come first and only once");
        rec.open = open_from_json(j);
      } else if (type == "frame") {
        ReplayItem item;
        try {
          item.frame = frame_from_json(j, mapping);
          item.frame_id = item.frame->frame_id;
          item.t_ms = item.frame->t_ms;
        } catch (const MalformedRecord&) {
          throw;
        } catch (const Error& e) {
          // Well-formed line with bad content: the session logs it as a drop.
          item.frame_id = peek_frame_id(j);
          item.t_ms = peek_t_ms(j);
          item.drop_reason = e.code();
          item.drop_detail = "line " + std::to_string(line_no) + ": " + e.what();
        }
        rec.items.push_back(std::move(item));
      } else if (type == "event" || type == "error" || type == "heartbeat") {
        continue;
      } else {
        throw MalformedRecord(0, "unknown record type '" + type + "'");
      }
    } catch (const MalformedRecord& e) {
      if (!terminated) {
        rec.warnings.push_back("line " + std::to_string(line_no) + " is truncated and was skipped");
        break;
      }
      throw MalformedRecord(line_start + e.byte_offset(), "line " + std::to_string(line_no) + ": " + e.what(),
                            line_no);
    } catch (const SchemaViolation& e) {
      throw MalformedRecord(line_start, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return rec;
}

Recording load_recording(const std::string& path, const LandmarkMapping* mapping) {
  std::istringstream in(read_text_file(path));
  return read_recording(in, mapping);
}

SessionSummary replay(const Recording& rec, Session& sink, const ReplayOptions& opts) {
  if (opts.speed < 0.0) throw std::invalid_argument("speed must be >= 0");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::optional<std::int64_t> t0;
  for (const auto& item : rec.items) {
    if (opts.speed > 0.0 && item.t_ms) {
      if (!t0) t0 = item.t_ms;
      const double offset_ms = static_cast<double>(*item.t_ms - *t0) / opts.speed;
      std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(
                                                std::chrono::duration<double, std::milli>(offset_ms)));
    }
    if (!item.frame) {
      sink.record_drop(item.frame_id, item.t_ms, item.drop_reason, item.drop_detail);
      continue;
    }
    if (auto ev = sink.step(*item.frame); ev && opts.on_event) opts.on_event(*ev);
  }
  return sink.summary();
}

}  // namespace rehab
