#include "rehab/generator.hpp"
#include "rehab/kernels.hpp"

#include <doctest.h>

#include <limits>
#include <random>

using namespace rehab;

TEST_SUITE("kernels") {

TEST_CASE("serial and parallel kernels agree") {
  TrajectorySpec spec;
  spec.peak_angle_deg = 110.0;
  spec.noise_sigma = 0.01;
  spec.seed = 3;
  spec.frame_count = 20000;
  auto frames = generate(spec);
  // knock some landmarks out so every status shows up
  for (std::size_t i = 0; i < frames.size(); i += 97) frames[i].landmarks[static_cast<std::size_t>(LandmarkId::LeftElbow)].reset();
  for (std::size_t i = 5; i < frames.size(); i += 89) frames[i].landmarks[static_cast<std::size_t>(LandmarkId::LeftHip)]->visibility = 0.1;
  for (std::size_t i = 11; i < frames.size(); i += 83) {
    frames[i].set(*frames[i].at(LandmarkId::LeftShoulder));
    auto lm = *frames[i].at(LandmarkId::LeftShoulder);
    lm.id = LandmarkId::LeftElbow;
    frames[i].set(lm);
  }

  const auto def = TrajectorySpec::default_joint();
  const auto a = kernels::measure_batch_serial(frames, def);
  const auto b = kernels::measure_batch_parallel(frames, def);
  CHECK(a == b);
  bool statuses[4] = {};
  for (const auto& x : a) statuses[static_cast<int>(x.status)] = true;
  CHECK(statuses[0]);
  CHECK(statuses[1]);
  CHECK(statuses[2]);
  CHECK(statuses[3]);

  std::vector<double> thetas;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 180.0);
  for (int i = 0; i < 50000; ++i) thetas.push_back(u(rng));
  thetas.push_back(std::numeric_limits<double>::quiet_NaN());
  Constraint c;
  c.constraint_id = "x";
  c.joint = "shoulder";
  c.axis = "abduction";
  c.max_angle = 90.0;
  c.min_angle = 20.0;
  CHECK(kernels::classify_batch_serial(thetas, c, {}) == kernels::classify_batch_parallel(thetas, c, {}));

  TrajectoryGenerator gen(spec);
  std::vector<double> commanded;
  for (std::size_t k = 0; k < frames.size(); ++k) commanded.push_back(commanded_angle(spec, static_cast<double>(gen.t_ms_of(k))));
  CHECK(kernels::abs_errors_serial(a, commanded) == kernels::abs_errors_parallel(a, commanded));
  CHECK(kernels::max_threads() >= 1);
}

TEST_CASE("empty input") {
  CHECK(kernels::measure_batch_parallel({}, TrajectorySpec::default_joint()).empty());
  CHECK(kernels::abs_errors_parallel({}, {}).empty());
}

}  // TEST_SUITE
