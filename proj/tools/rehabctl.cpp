// rehabctl: parse notes, simulate sessions, serve, replay, bench.

#include "rehab/bench.hpp"
#include "rehab/data.hpp"
#include "rehab/error.hpp"
#include "rehab/generator.hpp"
#include "rehab/ingest.hpp"
#include "rehab/server.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace rehab;
using nlohmann::json;

enum class Format { Text, LineJson };

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

// An error in what the user handed us: exit 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  FeedbackConfig feedback;
  std::string endpoint = "127.0.0.1:7878";
  double max_eval_fps = 120.0;
  std::int64_t heartbeat_ms = 5000;
  std::size_t queue_capacity = 64;
};

// Flag values that override the environment and config file when given.
struct Overrides {
  std::optional<double> delta_deg;
  std::optional<double> optimal_band_deg;
  std::optional<double> under_band_deg;
  std::optional<int> stability_frames;
  std::optional<std::int64_t> min_interval_ms;
  std::optional<std::string> endpoint;
  std::optional<double> max_eval_fps;
};

Settings resolve_settings(const std::optional<std::string>& config_flag, const Overrides& o) {
  Settings s;
  std::optional<std::string> path = config_flag;
  if (!path) {
    if (const char* env = std::getenv("REHAB_CONFIG"); env && *env) path = env;
  }
  if (path) {
    json j;
    try {
      j = json::parse(read_text_file(*path));
    } catch (const json::exception& e) {
      throw InputError("config " + *path + ": " + e.what());
    }
    if (!j.is_object()) throw InputError("config " + *path + " must be a JSON object");
    try {
      s.feedback.apply_json(j);
      if (j.contains("endpoint")) s.endpoint = j.at("endpoint").get<std::string>();
      if (j.contains("max_eval_fps")) s.max_eval_fps = j.at("max_eval_fps").get<double>();
      if (j.contains("heartbeat_ms")) s.heartbeat_ms = j.at("heartbeat_ms").get<std::int64_t>();
      if (j.contains("queue_capacity")) s.queue_capacity = j.at("queue_capacity").get<std::size_t>();
    } catch (const std::exception& e) {
      throw InputError("config " + *path + ": " + e.what());
    }
  }
  if (const char* env = std::getenv("REHAB_ENDPOINT"); env && *env) s.endpoint = env;

  if (o.delta_deg) s.feedback.delta_deg = *o.delta_deg;
  if (o.optimal_band_deg) s.feedback.optimal_band_deg = *o.optimal_band_deg;
  if (o.under_band_deg) s.feedback.under_band_deg = *o.under_band_deg;
  if (o.stability_frames) s.feedback.stability_frames = *o.stability_frames;
  if (o.min_interval_ms) s.feedback.min_message_interval_ms = *o.min_interval_ms;
  if (o.endpoint) s.endpoint = *o.endpoint;
  if (o.max_eval_fps) s.max_eval_fps = *o.max_eval_fps;
  try {
    s.feedback.check();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return s;
}

SessionOptions session_options(const Settings& s) {
  SessionOptions o;
  o.feedback = s.feedback;
  o.max_eval_fps = s.max_eval_fps;
  return o;
}

std::string note_id_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *v);
  return buf;
}

void print_event(const FeedbackEvent& e, Format f) {
  if (f == Format::LineJson) {
    std::cout << encode_event(e) << '\n';
    return;
  }
  char head[96];
  std::snprintf(head, sizeof head, "%8lld ms  frame %-6llu %-19s %-9s", static_cast<long long>(e.t_ms),
                static_cast<unsigned long long>(e.frame_id), std::string(state_name(e.state)).c_str(),
                std::string(severity_name(e.severity)).c_str());
  std::cout << head << " theta " << fmt_opt(e.theta_deg) << "  " << e.message;
  if (e.violated_constraint_id) std::cout << "  [" << *e.violated_constraint_id << "]";
  std::cout << '\n';
}

void print_summary(const SessionSummary& s, Format f) {
  if (f == Format::LineJson) {
    std::cout << s.to_json().dump() << '\n';
    return;
  }
  std::cout << "summary: " << s.frames_processed << " frames processed, " << s.frames_dropped << " dropped, "
            << s.events_emitted << " events, " << s.critical_violations << " critical violations over "
            << s.duration_ms << " ms\n";
  std::cout << "  dwell:";
  for (auto st : kAllStates) {
    const double d = s.dwell[static_cast<std::size_t>(st)];
    if (d > 0.0) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " %s %.1f%%", std::string(state_name(st)).c_str(), 100.0 * d);
      std::cout << buf;
    }
  }
  char lat[128];
  std::snprintf(lat, sizeof lat, "\n  latency us: mean %.1f  p95 %.1f  max %.1f\n", s.latency_mean_us, s.latency_p95_us,
                s.latency_max_us);
  std::cout << lat;
}

void print_warnings(const PatientState& st) {
  for (const auto& w : st.warnings) std::cerr << "warning: " << w << '\n';
}

void write_log(const Session& session, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileUnreadable("cannot write " + path);
  session.log().write_ndjson(out);
}

std::string note_from(const std::string& text, const std::string& file) {
  if (!file.empty()) return read_text_file(file);
  return text;
}

// --- subcommands ---------------------------------------------------------------

int cmd_parse(const std::vector<std::string>& files, Format f) {
  int rc = kExitOk;
  for (const auto& path : files) {
    try {
      const ClinicalNote note{.text = read_text_file(path), .note_id = note_id_of(path)};
      const ConstraintSet set = parse_note(note);
      if (set.empty()) throw NoConstraintsExtracted("no constraints found in " + path);
      for (const auto& r : set.residual_text) std::cerr << path << ": unparsed: " << r << '\n';
      if (f == Format::LineJson) {
        std::cout << to_schema_json(set).dump() << '\n';
      } else {
        std::cout << to_schema_json(set).dump(2) << '\n';
      }
    } catch (const Error& e) {
      std::cerr << path << ": " << e.code() << ": " << e.what() << '\n';
      rc = kExitInput;
    }
  }
  return rc;
}

struct SimulateArgs {
  std::string note = "Max 90 deg shoulder abduction";
  std::string note_file;
  std::string joint = "left_shoulder";
  std::string axis = "abduction";
  double peak = 90.0;
  double period_ms = 4000.0;
  int reps = 3;
  double fps = 30.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string log_path;
  std::string record_path;
};

int cmd_simulate(const SimulateArgs& a, const Settings& s, Format f) {
  const auto ref = parse_joint(a.joint);
  if (!ref || !ref->side) throw InputError("--joint needs a sided joint such as left_shoulder, got '" + a.joint + "'");
  const auto def = catalog_joint_def(ref->base, a.axis, *ref->side);
  if (!def) throw InputError("no catalog definition for " + a.joint + " " + a.axis);

  TrajectorySpec spec;
  spec.joint = *def;
  spec.peak_angle_deg = a.peak;
  spec.period_ms = a.period_ms;
  spec.repetitions = a.reps;
  spec.fps = a.fps;
  spec.noise_sigma = a.noise;
  spec.seed = a.seed;
  try {
    spec.check();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  const std::string note_text = note_from(a.note, a.note_file);
  GrammarExtractionProvider extraction;
  PatientState state = phase1({.text = note_text, .note_id = a.note_file.empty() ? "cli" : note_id_of(a.note_file)},
                              extraction, std::make_shared<MockSynthesisProvider>());
  print_warnings(state);
  if (f == Format::Text && state.video_url) std::cout << "demonstration: " << *state.video_url << '\n';
  Session session(std::move(state), session_options(s));

  std::ofstream record;
  if (!a.record_path.empty()) {
    record.open(a.record_path, std::ios::binary);
    if (!record) throw FileUnreadable("cannot write " + a.record_path);
    record << encode_open({.note = note_text, .note_id = "cli", .constraints = {}, .feedback_config = {}}) << '\n';
  }
  TrajectoryGenerator gen(spec);
  while (!gen.done()) {
    const PoseFrame frame = gen.next();
    if (record.is_open()) record << encode_frame(frame) << '\n';
    if (auto ev = session.step(frame)) print_event(*ev, f);
  }
  if (!a.log_path.empty()) write_log(session, a.log_path);
  if (session.log().empty()) {
    if (f == Format::LineJson) std::cout << R"({"type":"summary","frames_processed":0})" << '\n';
    else std::cout << "summary: no frames\n";
    return kExitOk;
  }
  print_summary(session.summary(), f);
  return kExitOk;
}

struct ReplayArgs {
  std::string path;
  double speed = 0.0;
  std::string note;
  std::string note_file;
  std::string log_path;
};

int cmd_replay(const ReplayArgs& a, const Settings& s, Format f) {
  if (a.speed < 0.0) throw InputError("--speed must be >= 0");
  Recording rec = load_recording(a.path, &LandmarkMapping::blazepose33());
  for (const auto& w : rec.warnings) std::cerr << "warning: " << a.path << ": " << w << '\n';

  OpenRecord open;
  if (!a.note.empty() || !a.note_file.empty()) {
    open.note = note_from(a.note, a.note_file);
    open.note_id = a.note_file.empty() ? "cli" : note_id_of(a.note_file);
  } else if (rec.open) {
    open = *rec.open;
  } else {
    throw InputError(a.path + " has no open record; pass --note or --note-file");
  }
  EngineConfig cfg;
  cfg.session = session_options(s);
  Session session = session_from_open(open, cfg);
  print_warnings(session.state());

  ReplayOptions ro;
  ro.speed = a.speed;
  ro.on_event = [f](const FeedbackEvent& e) { print_event(e, f); };
  const SessionSummary summary = replay(rec, session, ro);
  if (!a.log_path.empty()) write_log(session, a.log_path);
  print_summary(summary, f);
  return kExitOk;
}

Server* g_server = nullptr;

extern "C" void on_signal(int) {
  // Only flips an atomic; the main thread does the teardown.
  if (g_server) g_server->request_stop();
}

int cmd_serve(const Settings& s, std::size_t queue_capacity, Format f) {
  ServerOptions so;
  try {
    so.endpoint = parse_endpoint(s.endpoint);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  so.engine.session = session_options(s);
  so.engine.mapping = &LandmarkMapping::blazepose33();
  so.heartbeat = std::chrono::milliseconds(s.heartbeat_ms);
  so.queue_capacity = queue_capacity;
  std::mutex out_mu;
  so.on_log = [&](const std::string& msg) {
    std::lock_guard lock(out_mu);
    std::cerr << msg << '\n';
  };
  so.on_session_end = [&](const Session& session) {
    std::lock_guard lock(out_mu);
    try {
      if (f == Format::LineJson) {
        auto j = session.summary().to_json();
        j["session_id"] = session.state().session_id;
        std::cout << j.dump() << std::endl;
      } else {
        std::cout << "session " << session.state().session_id << " closed\n";
        print_summary(session.summary(), f);
        std::cout.flush();
      }
    } catch (const EmptyLog&) {
      std::cerr << "session " << session.state().session_id << " closed without frames\n";
    }
  };
  Server server(std::move(so));
  server.start();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.wait();
  server.stop();
  g_server = nullptr;
  return kExitOk;
}

void print_bench(const BenchReport& r, Format f) {
  if (f == Format::LineJson) {
    std::cout << r.to_json().dump() << '\n';
    return;
  }
  if (r.frames_offered == 0) {
    std::cout << "bench: no frames (duration 0)\n";
    return;
  }
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "bench: %.1f FPS target for %.1f s\n"
                "  frames: %zu offered, %zu processed, %zu dropped, %zu events\n"
                "  achieved FPS: %.2f\n"
                "  engine latency us: mean %.1f  p95 %.1f  max %.1f\n"
                "  end-to-end latency us: mean %.1f  p95 %.1f  max %.1f\n",
                r.target_fps, r.duration_s, r.frames_offered, r.frames_processed, r.frames_dropped, r.events_emitted,
                r.achieved_fps, r.engine.mean_us, r.engine.p95_us, r.engine.max_us, r.end_to_end.mean_us,
                r.end_to_end.p95_us, r.end_to_end.max_us);
  std::cout << buf;
  for (const auto& [reason, n] : r.drops_by_reason) std::cout << "  dropped (" << reason << "): " << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rehabilitation feedback engine"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string format = "text";
  std::optional<std::string> config_path;
  Overrides over;
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "line-json"}));
  app.add_option("--config", config_path, "Config file (FeedbackConfig fields plus endpoint)");

  auto add_feedback_flags = [&](CLI::App* sub) {
    sub->add_option("--delta", over.delta_deg, "Critical tolerance above max_angle, degrees");
    sub->add_option("--optimal-band", over.optimal_band_deg, "Optimal band below max_angle, degrees");
    sub->add_option("--under-band", over.under_band_deg, "Approaching band below max_angle, degrees");
    sub->add_option("--stability-frames", over.stability_frames, "Frames a state must persist before emission");
    sub->add_option("--min-interval-ms", over.min_interval_ms, "Minimum gap between repeated messages");
    sub->add_option("--max-eval-fps", over.max_eval_fps, "Evaluation rate cap, 0 disables");
  };

  std::vector<std::string> parse_files;
  auto* parse = app.add_subcommand("parse", "Extract constraints from clinical note files");
  parse->add_option("notes", parse_files, "Note files")->required()->check(CLI::ExistingFile);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a synthetic trajectory through a session");
  simulate->add_option("--note", sim.note, "Clinical note text");
  simulate->add_option("--note-file", sim.note_file, "Clinical note file")->check(CLI::ExistingFile);
  simulate->add_option("--joint", sim.joint, "Sided joint to move");
  simulate->add_option("--axis", sim.axis, "Motion axis");
  simulate->add_option("--peak", sim.peak, "Peak angle, degrees");
  simulate->add_option("--period-ms", sim.period_ms, "Repetition period");
  simulate->add_option("--reps", sim.reps, "Repetitions");
  simulate->add_option("--fps", sim.fps, "Frame rate");
  simulate->add_option("--noise", sim.noise, "Landmark noise sigma");
  simulate->add_option("--seed", sim.seed, "Noise seed");
  simulate->add_option("--log", sim.log_path, "Write the session log here");
  simulate->add_option("--record", sim.record_path, "Write the frame stream as a replayable recording");
  add_feedback_flags(simulate);

  std::size_t serve_queue = 64;
  std::optional<std::int64_t> heartbeat_ms;
  auto* serve = app.add_subcommand("serve", "Serve the streaming protocol");
  serve->add_option("--endpoint", over.endpoint, "host:port");
  serve->add_option("--queue", serve_queue, "Per-connection frame queue capacity");
  serve->add_option("--heartbeat-ms", heartbeat_ms, "Heartbeat after this much silence");
  add_feedback_flags(serve);

  ReplayArgs rep;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a recorded frame stream");
  replay_cmd->add_option("recording", rep.path, "Recording file")->required();
  replay_cmd->add_option("--speed", rep.speed, "Playback speed multiplier, 0 = as fast as possible");
  replay_cmd->add_option("--note", rep.note, "Note text when the recording has no open record");
  replay_cmd->add_option("--note-file", rep.note_file, "Note file")->check(CLI::ExistingFile);
  replay_cmd->add_option("--log", rep.log_path, "Write the session log here");
  add_feedback_flags(replay_cmd);

  BenchOptions bo;
  auto* bench = app.add_subcommand("bench", "Measure per-frame latency at a fixed frame rate");
  bench->add_option("--fps", bo.fps, "Frame rate");
  bench->add_option("--duration", bo.duration_s, "Seconds");
  bench->add_option("--note", bo.note, "Clinical note text");
  bench->add_option("--peak", bo.peak_angle_deg, "Peak angle of the synthetic motion");
  bench->add_option("--noise", bo.noise_sigma, "Landmark noise sigma");
  bench->add_option("--queue", bo.queue_capacity, "Frame queue capacity");
  add_feedback_flags(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }
  const Format f = format == "line-json" ? Format::LineJson : Format::Text;

  try {
    if (*parse) return cmd_parse(parse_files, f);
    Settings s = resolve_settings(config_path, over);
    if (heartbeat_ms) s.heartbeat_ms = *heartbeat_ms;
    if (*simulate) return cmd_simulate(sim, s, f);
    if (*replay_cmd) return cmd_replay(rep, s, f);
    if (*serve) return cmd_serve(s, serve_queue, f);
    if (*bench) {
      if (!(bo.fps > 0.0) || !(bo.duration_s >= 0.0)) throw InputError("--fps must be > 0 and --duration >= 0");
      bo.session = session_options(s);
      print_bench(run_bench(bo), f);
      return kExitOk;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const BindFailure& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const ProviderUnavailable& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    // Everything else in the taxonomy traces back to the input.
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInput;
}
