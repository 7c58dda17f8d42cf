#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "reposer/domrand.hpp"

using namespace reposer;

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  double s = 0.0, s2 = 0.0;
  for (double x : xs) s += x;
  const double mean = s / xs.size();
  for (double x : xs) s2 += (x - mean) * (x - mean);
  return {mean, std::sqrt(s2 / (xs.size() - 1))};
}

constexpr int kDraws = 100000;

}  // namespace

TEST_CASE("episode factors stay within their ranges") {
  const DRConfig cfg;
  std::vector<double> scale, mass;
  for (int i = 0; i < kDraws; ++i) {
    CounterRng rng(7, static_cast<std::uint64_t>(i), 0, Stream::Episode);
    const EnvParams p = sample_episode_randomization(rng, cfg);
    CHECK(p.object_scale >= 0.97);
    CHECK(p.object_scale <= 1.03);
    CHECK(p.object_mass >= 0.7);
    CHECK(p.object_mass <= 1.3);
    CHECK(p.object_friction >= 0.7);
    CHECK(p.object_friction <= 1.3);
    CHECK(p.table_friction >= 0.5);
    CHECK(p.table_friction <= 1.5);
    scale.push_back(p.object_scale);
    mass.push_back(p.object_mass);
  }
  // Uniform: mean (lo+hi)/2, std (hi-lo)/sqrt(12).
  const Moments ms = moments(scale), mm = moments(mass);
  CHECK(ms.mean == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(ms.stddev == doctest::Approx(0.06 / std::sqrt(12.0)).epsilon(0.02));
  CHECK(mm.mean == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(mm.stddev == doctest::Approx(0.6 / std::sqrt(12.0)).epsilon(0.02));
}

TEST_CASE("correlated offsets have the configured spread") {
  const DRConfig cfg;
  std::vector<double> jp, jv, tq;
  for (int i = 0; i < kDraws / 9; ++i) {
    CounterRng rng(8, static_cast<std::uint64_t>(i), 0, Stream::Episode);
    const EnvParams p = sample_episode_randomization(rng, cfg);
    jp.insert(jp.end(), p.joint_pos_offset.begin(), p.joint_pos_offset.end());
    jv.insert(jv.end(), p.joint_vel_offset.begin(), p.joint_vel_offset.end());
    tq.insert(tq.end(), p.torque_offset.begin(), p.torque_offset.end());
    CHECK(norm(p.cube_pos_offset) == 0.0);
  }
  CHECK(moments(jp).stddev == doctest::Approx(0.004).epsilon(0.05));
  CHECK(moments(jv).stddev == doctest::Approx(0.004).epsilon(0.05));
  CHECK(moments(tq).stddev == doctest::Approx(0.01).epsilon(0.05));
  CHECK(std::abs(moments(jp).mean) < 1e-4);
}

TEST_CASE("cube position noise residual matches sigma") {
  const DRConfig cfg;
  const EnvParams params;
  const Pose truth{{0.01, -0.02, 0.05}, Quaternion::from_axis_angle({0, 1, 0}, 0.4)};
  std::vector<double> rx, angles;
  for (int i = 0; i < kDraws; ++i) {
    CounterRng rng(9, 0, static_cast<std::uint64_t>(i), Stream::ObsNoise);
    const Pose p = apply_pose_noise(truth, cfg, params, rng);
    rx.push_back(p.translation.x - truth.translation.x);
    angles.push_back(rot_dist(p.rotation, truth.rotation));
  }
  CHECK(moments(rx).stddev == doctest::Approx(0.002).epsilon(0.02));
  CHECK(std::abs(moments(rx).mean) < 3 * 0.002 / std::sqrt(kDraws));
  // |N(0, s^2)| has mean s sqrt(2/pi).
  CHECK(moments(angles).mean == doctest::Approx(0.02 * std::sqrt(2.0 / std::numbers::pi)).epsilon(0.02));
}

TEST_CASE("joint observation noise combines per-step and episode terms") {
  const DRConfig cfg;
  std::vector<double> residual;
  for (int i = 0; i < kDraws; ++i) {
    CounterRng ep(10, static_cast<std::uint64_t>(i), 0, Stream::Episode);
    const EnvParams p = sample_episode_randomization(ep, cfg);
    CounterRng rng(10, static_cast<std::uint64_t>(i), 1, Stream::JointNoise);
    residual.push_back(apply_observation_noise(0.5, cfg.joint_position, p.joint_pos_offset[0], rng) - 0.5);
  }
  CHECK(moments(residual).stddev == doctest::Approx(std::hypot(0.003, 0.004)).epsilon(0.02));
}

TEST_CASE("torque noise and clamp") {
  const DRConfig cfg;
  std::vector<double> residual;
  for (int i = 0; i < kDraws / 9; ++i) {
    CounterRng ep(11, static_cast<std::uint64_t>(i), 0, Stream::Episode);
    const EnvParams p = sample_episode_randomization(ep, cfg);
    CounterRng rng(11, static_cast<std::uint64_t>(i), 1, Stream::ActNoise);
    std::array<double, kNumJoints> t;
    t.fill(0.1);
    apply_action_noise(t, cfg.torque, p.torque_offset, rng);
    for (double v : t) residual.push_back(v - 0.1);
  }
  CHECK(moments(residual).stddev == doctest::Approx(std::hypot(0.02, 0.01)).epsilon(0.03));

  CounterRng rng(12, 0, 0, Stream::ActNoise);
  std::array<double, kNumJoints> t;
  t.fill(0.36);
  const std::array<double, kNumJoints> big_offsets{1, 1, 1, 1, 1, 1, 1, 1, 1};
  apply_action_noise(t, cfg.torque, big_offsets, rng);
  for (double v : t) CHECK(v == 0.36);
}

TEST_CASE("zero sigma is the identity and the clamp range applies") {
  CounterRng rng(13, 0, 0, Stream::ObsNoise);
  const NoiseSpec none{0.0, 0.0, -1.0, 1.0};
  CHECK(apply_observation_noise(0.123456789, none, 0.0, rng) == 0.123456789);
  // Out-of-range input is passed through when no noise is applied at all.
  CHECK(apply_observation_noise(5.0, none, 0.0, rng) == 5.0);
  const NoiseSpec clamp{0.01, 0.0, -2.70, 1.57};
  CHECK(apply_observation_noise(1.57, clamp, 1.0, rng) == 1.57);
  CHECK(apply_observation_noise(-2.70, clamp, -1.0, rng) == -2.70);
}

TEST_CASE("disabled randomization is deterministic and nominal") {
  const DRConfig off = DRConfig::disabled();
  CounterRng rng(14, 0, 0, Stream::Episode);
  const EnvParams p = sample_episode_randomization(rng, off);
  CHECK(p.object_scale == 1.0);
  CHECK(p.object_mass == 1.0);
  CHECK(p.object_friction == 1.0);
  CHECK(p.table_friction == 1.0);
  for (double o : p.joint_pos_offset) CHECK(o == 0.0);
  const Pose truth{{0.1, 0.2, 0.3}, Quaternion::from_axis_angle({1, 0, 0}, 1.0)};
  const Pose seen = apply_pose_noise(truth, off, p, rng);
  CHECK(seen.translation == truth.translation);
  CHECK(seen.rotation.w == truth.rotation.w);
  CHECK(seen.rotation.x == truth.rotation.x);
}

TEST_CASE("invalid configs are rejected") {
  DRConfig c;
  c.object_mass = {1.3, 0.7};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = DRConfig{};
  c.torque.sigma = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = DRConfig{};
  c.external_force.probability = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_NOTHROW(DRConfig{}.validate());
}
