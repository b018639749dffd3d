#pragma once

#include "rehab/session.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <string>

namespace rehab {

// Drives synthetic frames at a wall-clock rate through a full session: a
// producer thread paces frames into a drop-oldest queue, the caller's thread
// evaluates them.
struct BenchOptions {
  double fps = 30.0;
  double duration_s = 60.0;
  std::string note = "Max 90 deg shoulder abduction";
  double peak_angle_deg = 100.0;
  double period_ms = 4000.0;
  double noise_sigma = 0.002;
  std::uint64_t seed = 1;
  std::size_t queue_capacity = 8;
  SessionOptions session;
};

struct LatencyStats {
  double mean_us = 0.0;
  double p95_us = 0.0;
  double max_us = 0.0;
};

struct BenchReport {
  double target_fps = 0.0;
  double duration_s = 0.0;
  std::size_t frames_offered = 0;
  std::size_t frames_processed = 0;
  std::size_t frames_dropped = 0;
  std::map<std::string, std::size_t> drops_by_reason;
  std::size_t events_emitted = 0;
  LatencyStats engine;      // Session::step only
  LatencyStats end_to_end;  // offer to completion, includes queueing
  double achieved_fps = 0.0;  // processed / (first offer -> last completion)
  double wall_s = 0.0;

  nlohmann::ordered_json to_json() const;
};

// Nearest-rank statistics. Empty input gives zeros.
LatencyStats latency_stats(std::vector<double> samples_us);

// Throws NoConstraintsExtracted for a note without constraints,
// std::invalid_argument for fps <= 0 or duration < 0.
BenchReport run_bench(const BenchOptions& opts);

}  // namespace rehab
