#include "rehab/bench.hpp"

#include "rehab/generator.hpp"
#include "rehab/queue.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace rehab {

namespace {

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

nlohmann::ordered_json stats_json(const LatencyStats& s) {
  return {{"mean", round3(s.mean_us)}, {"p95", round3(s.p95_us)}, {"max", round3(s.max_us)}};
}

struct Offered {
  PoseFrame frame;
  std::size_t index = 0;
};

}  // namespace

LatencyStats latency_stats(std::vector<double> samples) {
  LatencyStats s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean_us = sum / static_cast<double>(samples.size());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size())));
  s.p95_us = samples[std::max<std::size_t>(rank, 1) - 1];
  s.max_us = samples.back();
  return s;
}

nlohmann::ordered_json BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["type"] = "bench";
  j["target_fps"] = target_fps;
  j["duration_s"] = duration_s;
  j["frames_offered"] = frames_offered;
  j["frames_processed"] = frames_processed;
  j["frames_dropped"] = frames_dropped;
  j["drops_by_reason"] = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : drops_by_reason) j["drops_by_reason"][reason] = n;
  j["events_emitted"] = events_emitted;
  j["engine_latency_us"] = stats_json(engine);
  j["end_to_end_latency_us"] = stats_json(end_to_end);
  j["achieved_fps"] = round3(achieved_fps);
  j["wall_s"] = round3(wall_s);
  return j;
}

BenchReport run_bench(const BenchOptions& opts) {
  if (!(opts.fps > 0.0)) throw std::invalid_argument("fps must be positive");
  if (!(opts.duration_s >= 0.0)) throw std::invalid_argument("duration must be >= 0");

  BenchReport report;
  report.target_fps = opts.fps;
  report.duration_s = opts.duration_s;

  TrajectorySpec spec;
  spec.peak_angle_deg = opts.peak_angle_deg;
  spec.period_ms = opts.period_ms;
  spec.fps = opts.fps;
  spec.noise_sigma = opts.noise_sigma;
  spec.seed = opts.seed;
  spec.frame_count = static_cast<std::size_t>(std::llround(opts.duration_s * opts.fps));
  TrajectoryGenerator gen(spec);
  const std::size_t n = gen.frame_count();
  if (n == 0) return report;

  GrammarExtractionProvider extraction;
  PatientState state = phase1({.text = opts.note, .note_id = "bench"}, extraction,
                              std::make_shared<MockSynthesisProvider>());
  Session session(std::move(state), opts.session);

  using clock = std::chrono::steady_clock;
  std::vector<clock::time_point> offered_at(n);
  std::vector<double> end_to_end;
  end_to_end.reserve(n);
  DropOldestQueue<Offered> queue(opts.queue_capacity);
  std::mutex evicted_mu;
  std::vector<Offered> evicted;

  const auto start = clock::now() + std::chrono::milliseconds(5);
  std::thread producer([&] {
    const auto period = std::chrono::duration<double>(1.0 / opts.fps);
    for (std::size_t k = 0; k < n; ++k) {
      Offered item{gen.next(), k};
      std::this_thread::sleep_until(start + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(k)));
      offered_at[k] = clock::now();
      if (auto old = queue.push(std::move(item))) {
        std::lock_guard lock(evicted_mu);
        evicted.push_back(std::move(*old));
      }
    }
    queue.close();
  });

  clock::time_point last_done = start;
  auto flush_evicted = [&] {
    std::vector<Offered> pending;
    {
      std::lock_guard lock(evicted_mu);
      pending.swap(evicted);
    }
    for (const auto& e : pending) {
      session.record_drop(e.frame.frame_id, e.frame.t_ms, "backpressure", "evicted from a full frame queue");
    }
  };
  for (;;) {
    auto item = queue.pop(std::chrono::milliseconds(100));
    flush_evicted();
    if (!item) {
      if (queue.drained()) break;
      continue;
    }
    session.step(item->frame);
    last_done = clock::now();
    end_to_end.push_back(std::chrono::duration<double, std::micro>(last_done - offered_at[item->index]).count());
  }
  producer.join();
  flush_evicted();

  report.frames_offered = n;
  std::vector<double> engine;
  for (const auto& r : session.log().records()) {
    if (r.kind == LogRecord::Kind::Drop) {
      ++report.frames_dropped;
      ++report.drops_by_reason[r.reason];
    } else {
      ++report.frames_processed;
      engine.push_back(r.latency_us);
      if (r.event) ++report.events_emitted;
    }
  }
  report.engine = latency_stats(std::move(engine));
  report.end_to_end = latency_stats(std::move(end_to_end));
  report.wall_s = std::chrono::duration<double>(last_done - offered_at.front()).count();
  // A single frame has no span; count it as done within one frame period.
  const double span_s = std::max(report.wall_s, 1.0 / opts.fps);
  report.achieved_fps = static_cast<double>(report.frames_processed) / span_s;
  return report;
}

}  // namespace rehab
