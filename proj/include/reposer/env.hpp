#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reposer/domrand.hpp"
#include "reposer/physics.hpp"
#include "reposer/rng.hpp"
#include "reposer/spatial.hpp"

namespace reposer {

enum class PoseRepr { Keypoints, PosQuat };

std::string to_string(PoseRepr r);
PoseRepr pose_repr_from_string(const std::string& s);

struct SuccessThresholds {
  double position = 0.02;
  double rotation = 22.0 * std::numbers::pi / 180.0;
};

struct TaskConfig {
  int episode_length = 750;
  SuccessThresholds success;
  double w_fingertip_to_object = -750.0;
  double w_fingertip_velocity = -0.5;
  double w_object_goal = 40.0;
  KernelParams keypoint_kernel{30.0, 2.0};
  KernelParams posquat_kernel{50.0, 2.0};
  std::uint64_t curriculum_cutoff = 50'000'000;
  // Keypoints always sit on the nominal training cube, whatever the object.
  double keypoint_half_extent = 0.0325;
  double goal_radius = 0.15;
  double goal_z_min = 0.0325;
  double goal_z_max = 0.25;
  bool goal_yaw_only = false;
  double spawn_radius = 0.03;
  double joint_init_noise = 0.02;
  PoseRepr observation = PoseRepr::Keypoints;
  PoseRepr reward = PoseRepr::Keypoints;
  int camera_period = 5;
  double camera_sign_flip_prob = 0.0;
  double torque_limit = 0.36;
  double safety_damping = 0.1;

  void validate() const;
};

struct EnvConfig {
  PhysicsConfig physics;
  TaskConfig task;
  DRConfig dr;

  void validate() const;
};

/// Block offsets of the flat observation vectors. The critic vector starts
/// with the noise-free copy of the actor vector.
struct ObservationLayout {
  int joint_pos = 0;
  int joint_vel = 0;
  int object_pose = 0;
  int goal_pose = 0;
  int last_action = 0;
  int actor_dim = 0;
  int pose_dim = 0;
  int object_vel = 0;
  int fingertip_pose = 0;
  int fingertip_vel = 0;
  int fingertip_wrench = 0;
  int joint_torque = 0;
  int critic_dim = 0;

  static ObservationLayout make(PoseRepr observation);
};

struct Goal {
  Pose pose;
  KeypointSet keypoints;
};

Goal make_goal(const Pose& pose, const KeypointSet& local);

/// Uniform in a vertical cylinder; orientation uniform on SO(3) or yaw-only.
Goal sample_goal(CounterRng& rng, const TaskConfig& task);

struct ProcessedAction {
  std::array<double, kNumJoints> torque{};
  bool fault = false;
};

/// Scales [-1, 1] actions to joint torques, applies velocity-proportional
/// safety damping tau * max(0, 1 - c |qd| / v_max), then clamps.
ProcessedAction process_action(std::span<const float, kNumJoints> raw, std::span<const double, kNumJoints> joint_vel,
                               const TaskConfig& task, double max_joint_velocity);

struct RewardInputs {
  std::array<Vec3, kNumFingers> fingertip_pos;
  std::array<Vec3, kNumFingers> fingertip_vel;
  Pose object;
};

struct RewardBreakdown {
  double fingertip_to_object = 0.0;
  double fingertip_velocity_penalty = 0.0;
  double object_goal_reward = 0.0;
  double total = 0.0;
};

/// Sum over fingertips of the change in distance to the object centroid.
double fingertip_to_object(const std::array<Vec3, kNumFingers>& prev_tips, const Vec3& prev_centroid,
                           const std::array<Vec3, kNumFingers>& tips, const Vec3& centroid);

double object_goal_reward(const Pose& object, const Goal& goal, const TaskConfig& task, const KeypointSet& local);

RewardBreakdown compute_reward(const RewardInputs& prev, const RewardInputs& curr, const Goal& goal,
                               std::uint64_t global_step, const TaskConfig& task, const KeypointSet& local);

bool check_success(const Pose& pose, const Pose& goal, const SuccessThresholds& thresholds);

struct CameraState {
  Pose held;
  Quaternion last_q;
  bool has_last = false;
};

/// Object pose as the policy sees it: refreshed (with noise, in the world
/// frame) every `task.camera_period` steps and held in between. For the
/// pos-quat observation the quaternion sign is made temporally consistent.
Pose camera_delay_observe(const Pose& true_pose, std::uint64_t frame, CameraState& camera, const TaskConfig& task,
                          const DRConfig& dr, const EnvParams& params, CounterRng& noise_rng,
                          CounterRng& camera_rng);

struct EpisodeRecord {
  std::uint64_t episode = 0;
  int env_id = 0;
  bool success = false;
  bool success_any = false;
  double final_pos_err = 0.0;
  double final_rot_err = 0.0;
  double episode_return = 0.0;
  bool fault = false;
};

std::string to_jsonl(const EpisodeRecord& r);

/// What the trainer needs from a batch of environments.
class VecEnv {
 public:
  virtual ~VecEnv() = default;

  virtual int num_envs() const = 0;
  virtual int actor_dim() const = 0;
  virtual int critic_dim() const = 0;
  virtual int action_dim() const = 0;

  virtual void reset_all() = 0;
  virtual void step(std::span<const float> actions, std::uint64_t global_step) = 0;

  virtual const std::vector<float>& actor_obs() const = 0;
  virtual const std::vector<float>& critic_obs() const = 0;
  virtual const std::vector<float>& rewards() const = 0;
  virtual const std::vector<std::uint8_t>& dones() const = 0;
  /// Episodes that ended during the last step, in env order.
  virtual const std::vector<EpisodeRecord>& finished() const = 0;
  /// Per-env reward components of the last step; empty if the task has none.
  virtual std::span<const RewardBreakdown> reward_terms() const { return {}; }

  virtual std::vector<double> snapshot() const = 0;
  virtual void restore(std::span<const double> data) = 0;
};

struct EnvSlot {
  EnvParams params;
  BodyProps props;
  Goal goal;
  CameraState camera;
  Pose observed;
  int episode_step = 0;
  std::uint64_t episode_index = 0;
  std::uint64_t tick = 0;
  std::array<double, kNumJoints> last_action{};
  RewardInputs prev;
  double episode_return = 0.0;
  bool success_any = false;
};

/// N independent reposing environments stepped together. Randomness for env i
/// is drawn from counter-based streams keyed by (seed, i, per-env counter), so
/// results do not depend on how the batch is partitioned across workers.
class BatchedEnv final : public VecEnv {
 public:
  BatchedEnv(EnvConfig config, int num_envs, std::uint64_t seed, int workers = 1);

  int num_envs() const override { return state_.num_envs; }
  int actor_dim() const override { return layout_.actor_dim; }
  int critic_dim() const override { return layout_.critic_dim; }
  int action_dim() const override { return kNumJoints; }
  const EnvConfig& config() const { return config_; }
  const ObservationLayout& layout() const { return layout_; }
  const Physics& physics() const { return physics_; }
  const KeypointSet& local_keypoints() const { return local_; }

  void reset_all() override;
  /// actions: N x 9 in [-1, 1]. `global_step` drives the reward curriculum.
  void step(std::span<const float> actions, std::uint64_t global_step) override;

  const std::vector<float>& actor_obs() const override { return actor_obs_; }
  const std::vector<float>& critic_obs() const override { return critic_obs_; }
  const std::vector<float>& rewards() const override { return rewards_; }
  const std::vector<std::uint8_t>& dones() const override { return dones_; }
  std::span<const RewardBreakdown> reward_terms() const override { return terms_; }
  const std::vector<std::uint8_t>& faults() const { return faults_; }
  const std::vector<EpisodeRecord>& finished() const override { return finished_; }

  const SimState& state() const { return state_; }
  SimState& mutable_state() { return state_; }
  const EnvSlot& slot(int env) const { return slots_[env]; }
  EnvSlot& mutable_slot(int env) { return slots_[env]; }
  std::uint64_t seed() const { return seed_; }
  void set_workers(int workers) { workers_ = workers; }

  /// Re-derives observations from the current state (used after external
  /// edits of the state, e.g. tests and checkpoint restore).
  void refresh_observations(int env);

  /// Pins env params for every subsequent reset (robustness sweeps).
  void set_param_override(std::optional<EnvParams> params) { override_params_ = std::move(params); }

  /// Flat double snapshot of the complete mutable env state.
  std::vector<double> snapshot() const override;
  void restore(std::span<const double> data) override;

 private:
  void reset_env(int env);
  void step_range(std::span<const float> actions, std::uint64_t global_step, int begin, int end,
                  std::vector<EpisodeRecord>& finished);
  RewardInputs reward_inputs(int env) const;
  void write_observations(int env);

  EnvConfig config_;
  Physics physics_;
  ObservationLayout layout_;
  KeypointSet local_;
  std::uint64_t seed_;
  int workers_;
  SimState state_;
  std::vector<EnvSlot> slots_;
  std::vector<double> torque_buf_;
  std::vector<EnvParams> params_buf_;
  std::vector<float> actor_obs_, critic_obs_, rewards_;
  std::vector<std::uint8_t> dones_, faults_;
  std::vector<RewardBreakdown> terms_;
  std::vector<EpisodeRecord> finished_;
  std::optional<EnvParams> override_params_;
};

}  // namespace reposer
