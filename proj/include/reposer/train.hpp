#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reposer/checkpoint.hpp"
#include "reposer/config.hpp"
#include "reposer/env.hpp"
#include "reposer/ppo.hpp"

namespace reposer {

/// Builds the env selected by run.task.
std::unique_ptr<VecEnv> make_env(const EngineConfig& config, int num_envs, std::uint64_t seed, int workers = 1);

/// Raised when a checkpoint does not fit the network shapes implied by a config.
class IncompatibleCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Networks plus the observation normalizers they were trained with.
struct Policy {
  ActorCritic net;
  RunningMeanStd actor_norm;
  RunningMeanStd critic_norm;
  bool normalize = true;

  /// Actions clamped to [-1, 1]; deterministic uses the mean.
  std::vector<float> actions(std::span<const float> actor_obs, int n, bool stochastic = false,
                             std::uint64_t seed = 0, std::uint64_t draw_index = 0) const;

  void save(Checkpoint& ckpt) const;
  static Policy load(const Checkpoint& ckpt);
  /// Throws IncompatibleCheckpoint unless the shapes match an env of these
  /// dimensions and the config's hidden sizes.
  void check_compatible(int actor_dim, int critic_dim, int action_dim, const PPOConfig& config) const;
};

struct IterationStats {
  int iteration = 0;
  std::uint64_t global_step = 0;
  double lr = 0.0;
  UpdateStats update;
  double mean_reward = 0.0;
  // Weighted reward terms averaged over all env steps of the iteration;
  // zero for tasks without terms.
  double reward_fingertip_to_object = 0.0;
  double reward_fingertip_velocity = 0.0;
  double reward_object_goal = 0.0;
  int episodes = 0;
  double success_rate = 0.0;
  double success_any_rate = 0.0;
  double mean_episode_return = 0.0;
  double mean_final_pos_err = 0.0;
  double mean_final_rot_err = 0.0;
  int faults = 0;
  double collect_seconds = 0.0;
  double update_seconds = 0.0;
  double env_steps_per_second = 0.0;
};

/// Timing fields are only emitted on request so metrics files stay
/// reproducible byte for byte.
nlohmann::ordered_json to_json(const IterationStats& s, bool timing);

class Trainer {
 public:
  explicit Trainer(EngineConfig config);
  Trainer(EngineConfig config, std::unique_ptr<VecEnv> env);

  /// One rollout of horizon steps followed by a PPO update. On a non-finite
  /// update the batch is written to `dump_path` (if set) and the error rethrown.
  IterationStats iterate();
  bool finished() const { return global_step_ >= config_.run.total_steps; }

  std::uint64_t global_step() const { return global_step_; }
  int iteration() const { return iteration_; }
  int horizon() const { return horizon_; }
  const EngineConfig& config() const { return config_; }
  const Policy& policy() const { return policy_; }
  Policy& mutable_policy() { return policy_; }
  VecEnv& env() { return *env_; }
  const RolloutBatch& last_batch() const { return batch_; }
  /// Episodes that ended during the last iterate(), in completion order.
  const std::vector<EpisodeRecord>& last_episodes() const { return episodes_; }
  void set_dump_path(std::filesystem::path p) { dump_path_ = std::move(p); }

  /// Full training state: networks, optimizer, normalizers, env, counters.
  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  void collect(IterationStats& stats);

  EngineConfig config_;
  std::unique_ptr<VecEnv> env_;
  Policy policy_;
  OptimizerState opt_;
  RolloutBatch batch_;
  std::vector<EpisodeRecord> episodes_;
  int horizon_ = 0;
  std::uint64_t global_step_ = 0;
  int iteration_ = 0;
  std::optional<std::filesystem::path> dump_path_;
};

}  // namespace reposer
