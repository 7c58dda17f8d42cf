#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "reposer/env.hpp"

namespace reposer {

/// Planar point "fingertip" that must reach and hold a goal. Used as a fast
/// learning check for the trainer.
struct ReachConfig {
  int episode_length = 50;
  double max_step = 0.02;      // displacement per step at |action| = 1, per axis
  double arena_radius = 0.25;  // the point is projected back into this disc
  double goal_radius = 0.2;    // goals and starts are uniform in this disc
  KernelParams kernel{10.0, 2.0};
  double success_radius = 0.02;

  void validate() const;
};

class ReachEnv final : public VecEnv {
 public:
  static constexpr int kObsDim = 4;
  static constexpr int kActionDim = 2;

  ReachEnv(ReachConfig config, int num_envs, std::uint64_t seed);

  int num_envs() const override { return n_; }
  int actor_dim() const override { return kObsDim; }
  int critic_dim() const override { return kObsDim; }
  int action_dim() const override { return kActionDim; }

  void reset_all() override;
  void step(std::span<const float> actions, std::uint64_t global_step) override;

  const std::vector<float>& actor_obs() const override { return obs_; }
  const std::vector<float>& critic_obs() const override { return obs_; }
  const std::vector<float>& rewards() const override { return rewards_; }
  const std::vector<std::uint8_t>& dones() const override { return dones_; }
  const std::vector<EpisodeRecord>& finished() const override { return finished_; }

  std::vector<double> snapshot() const override;
  void restore(std::span<const double> data) override;

  const ReachConfig& config() const { return config_; }
  std::array<double, 2> position(int env) const { return pos_[env]; }
  std::array<double, 2> goal(int env) const { return goal_[env]; }

  /// Straight-line policy at full speed toward the goal.
  std::vector<float> oracle_actions() const;

 private:
  void reset_env(int env);
  void write_obs(int env);

  ReachConfig config_;
  int n_;
  std::uint64_t seed_;
  std::vector<std::array<double, 2>> pos_, goal_;
  std::vector<int> step_;
  std::vector<std::uint64_t> episode_;
  std::vector<double> return_;
  std::vector<float> obs_, rewards_;
  std::vector<std::uint8_t> dones_;
  std::vector<EpisodeRecord> finished_;
};

}  // namespace reposer
