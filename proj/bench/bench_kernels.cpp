// Serial vs OpenMP timings for the batch kernels.
//   bench_kernels [frames] [repeats]

#include "rehab/generator.hpp"
#include "rehab/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

using namespace rehab;

namespace {

template <typename F>
double best_ms(int repeats, F&& f) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-14s serial %9.2f ms  parallel %9.2f ms  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, same ? "equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 500000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;

  TrajectorySpec spec;
  spec.peak_angle_deg = 110.0;
  spec.noise_sigma = 0.005;
  spec.seed = 1;
  spec.frame_count = n;
  const auto frames = generate(spec);
  TrajectoryGenerator gen(spec);
  std::vector<double> commanded(n);
  for (std::size_t k = 0; k < n; ++k) commanded[k] = commanded_angle(spec, static_cast<double>(gen.t_ms_of(k)));

  std::printf("frames %zu, threads %d, best of %d\n", n, kernels::max_threads(), repeats);

  std::vector<kernels::BatchAngle> ms, mp;
  const double m1 = best_ms(repeats, [&] { ms = kernels::measure_batch_serial(frames, spec.joint); });
  const double m2 = best_ms(repeats, [&] { mp = kernels::measure_batch_parallel(frames, spec.joint); });
  row("measure", m1, m2, ms == mp);

  std::vector<double> thetas(n);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 180.0);
  for (auto& t : thetas) t = u(rng);
  Constraint c;
  c.constraint_id = "shoulder.abduction";
  c.joint = "shoulder";
  c.axis = "abduction";
  c.max_angle = 90.0;
  std::vector<KinematicState> cs, cp;
  const double c1 = best_ms(repeats, [&] { cs = kernels::classify_batch_serial(thetas, c, {}); });
  const double c2 = best_ms(repeats, [&] { cp = kernels::classify_batch_parallel(thetas, c, {}); });
  row("classify", c1, c2, cs == cp);

  std::vector<double> es, ep;
  const double e1 = best_ms(repeats, [&] { es = kernels::abs_errors_serial(ms, commanded); });
  const double e2 = best_ms(repeats, [&] { ep = kernels::abs_errors_parallel(ms, commanded); });
  row("abs_errors", e1, e2, es == ep);

  return (ms == mp && cs == cp && es == ep) ? 0 : 1;
}
