#pragma once

#include <span>

#include "reposer/physics.hpp"
#include "reposer/rng.hpp"

namespace reposer {

/// Additive Gaussian noise: `sigma` is redrawn every step, `sigma_corr` once
/// per episode. The noised value is clamped to [lo, hi].
struct NoiseSpec {
  double sigma = 0.0;
  double sigma_corr = 0.0;
  double lo = -1e300;
  double hi = 1e300;

  void validate() const;
};

struct UniformRange {
  double lo = 1.0;
  double hi = 1.0;
};

struct DRConfig {
  bool enabled = true;
  NoiseSpec cube_position{0.002, 0.0, -0.30, 0.30};
  NoiseSpec cube_orientation{0.020, 0.0, -1.00, 1.00};
  NoiseSpec joint_position{0.003, 0.004, -2.70, 1.57};
  NoiseSpec joint_velocity{0.003, 0.004, -10.0, 10.0};
  NoiseSpec torque{0.02, 0.01, -0.36, 0.36};
  UniformRange object_scale{0.97, 1.03};
  UniformRange object_mass{0.70, 1.30};
  UniformRange object_friction{0.70, 1.30};
  UniformRange table_friction{0.50, 1.50};
  ExternalForceConfig external_force;

  void validate() const;
  /// Every sigma zeroed, every factor pinned to 1, no external forces.
  static DRConfig disabled();
};

/// Per-episode scaling factors and correlated offsets for one env.
EnvParams sample_episode_randomization(CounterRng& rng, const DRConfig& config);

/// value + episode_offset + N(0, sigma^2), clamped.
double apply_observation_noise(double value, const NoiseSpec& spec, double episode_offset, CounterRng& rng);
void apply_observation_noise(std::span<double> values, const NoiseSpec& spec,
                             std::span<const double> episode_offsets, CounterRng& rng);

/// Noise on the object pose in the world frame. Position is perturbed per
/// axis; orientation by a rotation about a uniformly random axis with angle
/// ~ N(0, sigma^2), composed with the episode's correlated rotation offset.
Pose apply_pose_noise(const Pose& pose, const DRConfig& config, const EnvParams& params, CounterRng& rng);

/// Additive torque noise followed by the clamp.
void apply_action_noise(std::span<double> torques, const NoiseSpec& spec, std::span<const double> episode_offsets,
                        CounterRng& rng);

}  // namespace reposer
