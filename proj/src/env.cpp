#include "reposer/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "reposer/parallel.hpp"

namespace reposer {

std::string to_string(PoseRepr r) { return r == PoseRepr::Keypoints ? "keypoints" : "posquat"; }

PoseRepr pose_repr_from_string(const std::string& s) {
  if (s == "keypoints" || s == "kp" || s == "KP") return PoseRepr::Keypoints;
  if (s == "posquat" || s == "pq" || s == "PQ") return PoseRepr::PosQuat;
  throw std::invalid_argument("unknown pose representation '" + s + "' (expected keypoints|posquat)");
}

void TaskConfig::validate() const {
  if (episode_length <= 0) throw std::invalid_argument("task: episode_length must be > 0");
  if (!(success.position > 0) || !(success.rotation > 0)) throw std::invalid_argument("task: thresholds must be > 0");
  for (const KernelParams* k : {&keypoint_kernel, &posquat_kernel})
    if (!(k->a > 0) || !(k->b >= 0)) throw std::invalid_argument("task: kernel needs a > 0 and b >= 0");
  if (!(keypoint_half_extent > 0)) throw std::invalid_argument("task: keypoint_half_extent must be > 0");
  if (!(goal_radius >= 0) || !(goal_z_min <= goal_z_max)) throw std::invalid_argument("task: goal workspace invalid");
  if (!(spawn_radius >= 0) || !(joint_init_noise >= 0)) throw std::invalid_argument("task: reset noise invalid");
  if (camera_period < 1) throw std::invalid_argument("task: camera_period must be >= 1");
  if (camera_sign_flip_prob < 0 || camera_sign_flip_prob > 1)
    throw std::invalid_argument("task: camera_sign_flip_prob must be in [0, 1]");
  if (!(torque_limit > 0)) throw std::invalid_argument("task: torque_limit must be > 0");
  if (safety_damping < 0 || safety_damping > 1) throw std::invalid_argument("task: safety_damping must be in [0, 1]");
}

void EnvConfig::validate() const {
  physics.validate();
  task.validate();
  dr.validate();
}

ObservationLayout ObservationLayout::make(PoseRepr observation) {
  ObservationLayout l;
  l.pose_dim = observation == PoseRepr::Keypoints ? kKeypointFlatDim : 7;
  l.joint_pos = 0;
  l.joint_vel = l.joint_pos + kNumJoints;
  l.object_pose = l.joint_vel + kNumJoints;
  l.goal_pose = l.object_pose + l.pose_dim;
  l.last_action = l.goal_pose + l.pose_dim;
  l.actor_dim = l.last_action + kNumJoints;
  l.object_vel = l.actor_dim;
  l.fingertip_pose = l.object_vel + 6;
  l.fingertip_vel = l.fingertip_pose + 7 * kNumFingers;
  l.fingertip_wrench = l.fingertip_vel + 6 * kNumFingers;
  l.joint_torque = l.fingertip_wrench + 6 * kNumFingers;
  l.critic_dim = l.joint_torque + kNumJoints;
  return l;
}

Goal make_goal(const Pose& pose, const KeypointSet& local) { return {pose, pose_to_keypoints(pose, local)}; }

Goal sample_goal(CounterRng& rng, const TaskConfig& task) {
  const double r = task.goal_radius * std::sqrt(rng.uniform());
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double z = rng.uniform(task.goal_z_min, task.goal_z_max);
  Quaternion q;
  if (task.goal_yaw_only)
    q = Quaternion::from_axis_angle({0, 0, 1}, rng.uniform(-std::numbers::pi, std::numbers::pi));
  else
    q = rng.uniform_rotation();
  const Pose pose{{r * std::cos(theta), r * std::sin(theta), z}, q};
  return make_goal(pose, cube_local_keypoints(task.keypoint_half_extent));
}

ProcessedAction process_action(std::span<const float, kNumJoints> raw, std::span<const double, kNumJoints> joint_vel,
                               const TaskConfig& task, double max_joint_velocity) {
  ProcessedAction out;
  for (float a : raw) {
    if (!std::isfinite(a)) {
      out.fault = true;
      return out;
    }
  }
  for (int j = 0; j < kNumJoints; ++j) {
    const double a = std::clamp(static_cast<double>(raw[j]), -1.0, 1.0);
    const double damp = std::max(0.0, 1.0 - task.safety_damping * std::abs(joint_vel[j]) / max_joint_velocity);
    out.torque[j] = std::clamp(a * task.torque_limit * damp, -task.torque_limit, task.torque_limit);
  }
  return out;
}

double fingertip_to_object(const std::array<Vec3, kNumFingers>& prev_tips, const Vec3& prev_centroid,
                           const std::array<Vec3, kNumFingers>& tips, const Vec3& centroid) {
  double s = 0.0;
  for (int f = 0; f < kNumFingers; ++f) s += norm(tips[f] - centroid) - norm(prev_tips[f] - prev_centroid);
  return s;
}

double object_goal_reward(const Pose& object, const Goal& goal, const TaskConfig& task, const KeypointSet& local) {
  if (task.reward == PoseRepr::Keypoints) {
    const KeypointSet cur = pose_to_keypoints(object, local);
    double s = 0.0;
    for (int i = 0; i < kNumKeypoints; ++i)
      s += logistic_kernel(norm(cur.points[i] - goal.keypoints.points[i]), task.keypoint_kernel);
    return s;
  }
  const double pos_err = norm(object.translation - goal.pose.translation);
  const double rot_err = rot_dist(object.rotation, goal.pose.rotation);
  return logistic_kernel(pos_err, task.posquat_kernel) + 1.0 / (3.0 * std::abs(rot_err) + 0.01);
}

RewardBreakdown compute_reward(const RewardInputs& prev, const RewardInputs& curr, const Goal& goal,
                               std::uint64_t global_step, const TaskConfig& task, const KeypointSet& local) {
  RewardBreakdown r;
  r.fingertip_to_object =
      fingertip_to_object(prev.fingertip_pos, prev.object.translation, curr.fingertip_pos, curr.object.translation);
  for (const Vec3& v : curr.fingertip_vel) r.fingertip_velocity_penalty += dot(v, v);
  r.object_goal_reward = object_goal_reward(curr.object, goal, task, local);
  const double approach =
      global_step <= task.curriculum_cutoff ? task.w_fingertip_to_object * r.fingertip_to_object : 0.0;
  r.total = approach + task.w_fingertip_velocity * r.fingertip_velocity_penalty +
            task.w_object_goal * r.object_goal_reward;
  return r;
}

bool check_success(const Pose& pose, const Pose& goal, const SuccessThresholds& thresholds) {
  return norm(pose.translation - goal.translation) < thresholds.position &&
         rot_dist(pose.rotation, goal.rotation) < thresholds.rotation;
}

Pose camera_delay_observe(const Pose& true_pose, std::uint64_t frame, CameraState& camera, const TaskConfig& task,
                          const DRConfig& dr, const EnvParams& params, CounterRng& noise_rng,
                          CounterRng& camera_rng) {
  if (frame % static_cast<std::uint64_t>(task.camera_period) != 0 && camera.has_last) return camera.held;
  Pose seen = apply_pose_noise(true_pose, dr, params, noise_rng);
  if (task.camera_sign_flip_prob > 0.0 && camera_rng.uniform() < task.camera_sign_flip_prob)
    seen.rotation = -seen.rotation;
  if (task.observation == PoseRepr::PosQuat && camera.has_last)
    seen.rotation = quat_sign_filter(seen.rotation, camera.last_q);
  camera.held = seen;
  camera.last_q = seen.rotation;
  camera.has_last = true;
  return seen;
}

std::string to_jsonl(const EpisodeRecord& r) {
  nlohmann::ordered_json j;
  j["episode"] = r.episode;
  j["env_id"] = r.env_id;
  j["success"] = r.success;
  j["success_any"] = r.success_any;
  j["final_pos_err"] = r.final_pos_err;
  j["final_rot_err"] = r.final_rot_err;
  j["return"] = r.episode_return;
  if (r.fault) j["fault"] = true;
  return j.dump();
}

BatchedEnv::BatchedEnv(EnvConfig config, int num_envs, std::uint64_t seed, int workers)
    : config_(std::move(config)),
      physics_(config_.physics),
      layout_(ObservationLayout::make(config_.task.observation)),
      local_(cube_local_keypoints(config_.task.keypoint_half_extent)),
      seed_(seed),
      workers_(workers),
      state_(num_envs),
      slots_(static_cast<std::size_t>(num_envs)),
      torque_buf_(static_cast<std::size_t>(num_envs) * kNumJoints, 0.0),
      params_buf_(static_cast<std::size_t>(num_envs)),
      actor_obs_(static_cast<std::size_t>(num_envs) * layout_.actor_dim, 0.0f),
      critic_obs_(static_cast<std::size_t>(num_envs) * layout_.critic_dim, 0.0f),
      rewards_(static_cast<std::size_t>(num_envs), 0.0f),
      dones_(static_cast<std::size_t>(num_envs), 0),
      faults_(static_cast<std::size_t>(num_envs), 0),
      terms_(static_cast<std::size_t>(num_envs)) {
  if (num_envs <= 0) throw std::invalid_argument("BatchedEnv: num_envs must be > 0");
  config_.validate();
  reset_all();
}

void BatchedEnv::reset_all() {
  parallel_for(num_envs(), workers_, [this](int b, int e) {
    for (int i = b; i < e; ++i) {
      reset_env(i);
      write_observations(i);
    }
  });
  std::fill(rewards_.begin(), rewards_.end(), 0.0f);
  std::fill(dones_.begin(), dones_.end(), 0);
  std::fill(faults_.begin(), faults_.end(), 0);
  finished_.clear();
}

RewardInputs BatchedEnv::reward_inputs(int env) const {
  const auto tips = physics_.fingertip_state(
      std::span<const double, kNumJoints>(&state_.joint_pos[kNumJoints * env], kNumJoints),
      std::span<const double, kNumJoints>(&state_.joint_vel[kNumJoints * env], kNumJoints));
  RewardInputs in;
  for (int f = 0; f < kNumFingers; ++f) {
    in.fingertip_pos[f] = tips.pose[f].translation;
    in.fingertip_vel[f] = tips.linear_velocity[f];
  }
  in.object = state_.object_pose(env);
  return in;
}

void BatchedEnv::reset_env(int i) {
  EnvSlot& s = slots_[i];
  CounterRng episode_rng(seed_, i, s.episode_index, Stream::Episode);
  CounterRng reset_rng(seed_, i, s.episode_index, Stream::Reset);
  CounterRng goal_rng(seed_, i, s.episode_index, Stream::Goal);

  s.params = override_params_ ? *override_params_ : sample_episode_randomization(episode_rng, config_.dr);
  s.props = body_props(config_.physics.object, s.params, config_.physics.contact);
  params_buf_[i] = s.params;

  const HandModel& hand = config_.physics.hand;
  for (int j = 0; j < kNumJoints; ++j) {
    const double noise = config_.task.joint_init_noise > 0 ? reset_rng.normal(0.0, config_.task.joint_init_noise) : 0.0;
    state_.joint_pos[kNumJoints * i + j] = std::clamp(noise, hand.joint_lower, hand.joint_upper);
    state_.joint_vel[kNumJoints * i + j] = 0.0;
    state_.joint_torque[kNumJoints * i + j] = 0.0;
  }
  const double r = config_.task.spawn_radius * std::sqrt(reset_rng.uniform());
  const double theta = reset_rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double yaw = reset_rng.uniform(-std::numbers::pi, std::numbers::pi);
  state_.set_object_pose(i, {{r * std::cos(theta), r * std::sin(theta), physics_.resting_height(s.props)},
                             Quaternion::from_axis_angle({0, 0, 1}, yaw)});
  for (int a = 0; a < 3; ++a) {
    state_.object_linvel[3 * i + a] = 0.0;
    state_.object_angvel[3 * i + a] = 0.0;
    state_.external_force[3 * i + a] = 0.0;
  }
  std::fill_n(&state_.fingertip_wrench[6 * kNumFingers * i], 6 * kNumFingers, 0.0);
  state_.fault[i] = 0;

  s.goal = sample_goal(goal_rng, config_.task);
  s.camera = CameraState{};
  s.episode_step = 0;
  s.last_action.fill(0.0);
  s.prev = reward_inputs(i);
  s.episode_return = 0.0;
  s.success_any = false;
  CounterRng noise_rng(seed_, i, s.tick, Stream::ObsNoise);
  CounterRng camera_rng(seed_, i, s.tick, Stream::Camera);
  s.observed = camera_delay_observe(state_.object_pose(i), 0, s.camera, config_.task, config_.dr, s.params,
                                    noise_rng, camera_rng);
}

void BatchedEnv::step(std::span<const float> actions, std::uint64_t global_step) {
  if (actions.size() != static_cast<std::size_t>(num_envs()) * kNumJoints)
    throw std::invalid_argument("BatchedEnv::step: actions must be num_envs x 9");
  const int workers = std::clamp(workers_, 1, num_envs());
  std::vector<std::vector<EpisodeRecord>> per_worker(static_cast<std::size_t>(workers));
  const int chunk = (num_envs() + workers - 1) / workers;
  parallel_for(num_envs(), workers, [&](int b, int e) {
    step_range(actions, global_step, b, e, per_worker[static_cast<std::size_t>(b / chunk)]);
  });
  finished_.clear();
  for (auto& v : per_worker) finished_.insert(finished_.end(), v.begin(), v.end());
  state_.step_count += 1;
}

void BatchedEnv::step_range(std::span<const float> actions, std::uint64_t global_step, int begin, int end,
                            std::vector<EpisodeRecord>& finished) {
  const TaskConfig& task = config_.task;
  const DRConfig& dr = config_.dr;
  for (int i = begin; i < end; ++i) {
    EnvSlot& s = slots_[i];
    const ProcessedAction pa =
        process_action(std::span<const float, kNumJoints>(actions.data() + kNumJoints * i, kNumJoints),
                       std::span<const double, kNumJoints>(&state_.joint_vel[kNumJoints * i], kNumJoints), task,
                       config_.physics.hand.max_joint_velocity);
    faults_[i] = pa.fault ? 1 : 0;
    s.last_action = pa.torque;
    double* applied = &torque_buf_[kNumJoints * i];
    std::copy(pa.torque.begin(), pa.torque.end(), applied);
    if (dr.enabled) {
      CounterRng act_rng(seed_, i, s.tick, Stream::ActNoise);
      apply_action_noise(std::span<double>(applied, kNumJoints), dr.torque, s.params.torque_offset, act_rng);
      CounterRng force_rng(seed_, i, s.tick, Stream::ExternalForce);
      apply_external_force(state_, i, force_rng, dr.external_force, s.props.mass, config_.physics.gravity);
    }
  }
  physics_.step(state_, torque_buf_, params_buf_, begin, end);

  for (int i = begin; i < end; ++i) {
    EnvSlot& s = slots_[i];
    s.tick += 1;
    if (state_.fault[i]) {
      EpisodeRecord rec{s.episode_index, i, false, s.success_any, 0.0, 0.0, s.episode_return, true};
      finished.push_back(rec);
      faults_[i] = 1;
      rewards_[i] = 0.0f;
      terms_[i] = {};
      dones_[i] = 1;
      s.episode_index += 1;
      reset_env(i);
      write_observations(i);
      continue;
    }
    const RewardInputs curr = reward_inputs(i);
    terms_[i] = compute_reward(s.prev, curr, s.goal, global_step, task, local_);
    rewards_[i] = static_cast<float>(terms_[i].total);
    s.prev = curr;
    s.episode_return += terms_[i].total;
    s.episode_step += 1;
    const Pose pose = curr.object;
    if (check_success(pose, s.goal.pose, task.success)) s.success_any = true;

    if (s.episode_step >= task.episode_length) {
      EpisodeRecord rec;
      rec.episode = s.episode_index;
      rec.env_id = i;
      rec.success = check_success(pose, s.goal.pose, task.success);
      rec.success_any = s.success_any;
      rec.final_pos_err = norm(pose.translation - s.goal.pose.translation);
      rec.final_rot_err = rot_dist(pose.rotation, s.goal.pose.rotation);
      rec.episode_return = s.episode_return;
      finished.push_back(rec);
      dones_[i] = 1;
      s.episode_index += 1;
      reset_env(i);
    } else {
      dones_[i] = 0;
      CounterRng noise_rng(seed_, i, s.tick, Stream::ObsNoise);
      CounterRng camera_rng(seed_, i, s.tick, Stream::Camera);
      s.observed = camera_delay_observe(pose, static_cast<std::uint64_t>(s.episode_step), s.camera, task, dr, s.params,
                                        noise_rng, camera_rng);
    }
    write_observations(i);
  }
}

void BatchedEnv::refresh_observations(int env) { write_observations(env); }

namespace {

void write_pose(float* out, const Pose& pose, PoseRepr repr, const KeypointSet& local) {
  if (repr == PoseRepr::Keypoints) {
    const auto flat = keypoints_to_flat(pose_to_keypoints(pose, local));
    for (int k = 0; k < kKeypointFlatDim; ++k) out[k] = static_cast<float>(flat[k]);
  } else {
    out[0] = static_cast<float>(pose.translation.x);
    out[1] = static_cast<float>(pose.translation.y);
    out[2] = static_cast<float>(pose.translation.z);
    out[3] = static_cast<float>(pose.rotation.x);
    out[4] = static_cast<float>(pose.rotation.y);
    out[5] = static_cast<float>(pose.rotation.z);
    out[6] = static_cast<float>(pose.rotation.w);
  }
}

}  // namespace

void BatchedEnv::write_observations(int i) {
  const ObservationLayout& L = layout_;
  const EnvSlot& s = slots_[i];
  const TaskConfig& task = config_.task;
  const DRConfig& dr = config_.dr;
  float* actor = &actor_obs_[static_cast<std::size_t>(L.actor_dim) * i];
  float* critic = &critic_obs_[static_cast<std::size_t>(L.critic_dim) * i];
  const double* q = &state_.joint_pos[kNumJoints * i];
  const double* qd = &state_.joint_vel[kNumJoints * i];

  // Critic: exact simulator state.
  for (int j = 0; j < kNumJoints; ++j) {
    critic[L.joint_pos + j] = static_cast<float>(q[j]);
    critic[L.joint_vel + j] = static_cast<float>(qd[j]);
    critic[L.last_action + j] = static_cast<float>(s.last_action[j]);
    critic[L.joint_torque + j] = static_cast<float>(state_.joint_torque[kNumJoints * i + j]);
  }
  write_pose(critic + L.object_pose, state_.object_pose(i), task.observation, local_);
  write_pose(critic + L.goal_pose, s.goal.pose, task.observation, local_);
  for (int a = 0; a < 3; ++a) {
    critic[L.object_vel + a] = static_cast<float>(state_.object_linvel[3 * i + a]);
    critic[L.object_vel + 3 + a] = static_cast<float>(state_.object_angvel[3 * i + a]);
  }
  const auto tips = physics_.fingertip_state(std::span<const double, kNumJoints>(q, kNumJoints),
                                             std::span<const double, kNumJoints>(qd, kNumJoints));
  for (int f = 0; f < kNumFingers; ++f) {
    write_pose(critic + L.fingertip_pose + 7 * f, tips.pose[f], PoseRepr::PosQuat, local_);
    for (int a = 0; a < 3; ++a) {
      critic[L.fingertip_vel + 6 * f + a] = static_cast<float>(tips.linear_velocity[f][a]);
      critic[L.fingertip_vel + 6 * f + 3 + a] = static_cast<float>(tips.angular_velocity[f][a]);
    }
  }
  for (int k = 0; k < 6 * kNumFingers; ++k)
    critic[L.fingertip_wrench + k] = static_cast<float>(state_.fingertip_wrench[6 * kNumFingers * i + k]);

  // Actor: noised proprioception, camera-held object pose.
  if (dr.enabled) {
    CounterRng joint_rng(seed_, i, s.tick, Stream::JointNoise);
    for (int j = 0; j < kNumJoints; ++j) {
      actor[L.joint_pos + j] = static_cast<float>(
          apply_observation_noise(q[j], dr.joint_position, s.params.joint_pos_offset[j], joint_rng));
      actor[L.joint_vel + j] = static_cast<float>(
          apply_observation_noise(qd[j], dr.joint_velocity, s.params.joint_vel_offset[j], joint_rng));
    }
  } else {
    std::copy_n(critic + L.joint_pos, kNumJoints, actor + L.joint_pos);
    std::copy_n(critic + L.joint_vel, kNumJoints, actor + L.joint_vel);
  }
  write_pose(actor + L.object_pose, s.observed, task.observation, local_);
  std::copy_n(critic + L.goal_pose, L.pose_dim, actor + L.goal_pose);
  std::copy_n(critic + L.last_action, kNumJoints, actor + L.last_action);
}

namespace {

class Packer {
 public:
  explicit Packer(std::vector<double>& out) : out_(&out) {}
  void put(double v) { out_->push_back(v); }
  void put(const Vec3& v) {
    put(v.x);
    put(v.y);
    put(v.z);
  }
  void put(const Quaternion& q) {
    put(q.x);
    put(q.y);
    put(q.z);
    put(q.w);
  }
  void put(const Pose& p) {
    put(p.translation);
    put(p.rotation);
  }
  template <typename C>
  void put_all(const C& c) {
    for (auto v : c) put(static_cast<double>(v));
  }

 private:
  std::vector<double>* out_;
};

class Unpacker {
 public:
  explicit Unpacker(std::span<const double> in) : in_(in) {}
  double get() {
    if (pos_ >= in_.size()) throw std::invalid_argument("env snapshot truncated");
    return in_[pos_++];
  }
  Vec3 get_vec() {
    const double x = get(), y = get(), z = get();
    return {x, y, z};
  }
  Quaternion get_quat() {
    const double x = get(), y = get(), z = get(), w = get();
    return {x, y, z, w};
  }
  Pose get_pose() {
    const Vec3 t = get_vec();
    return {t, get_quat()};
  }
  template <typename C>
  void get_all(C& c) {
    for (auto& v : c) v = static_cast<std::remove_reference_t<decltype(v)>>(get());
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const double> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<double> BatchedEnv::snapshot() const {
  std::vector<double> out;
  Packer p(out);
  p.put(static_cast<double>(num_envs()));
  p.put(static_cast<double>(state_.step_count));
  p.put_all(state_.joint_pos);
  p.put_all(state_.joint_vel);
  p.put_all(state_.joint_torque);
  p.put_all(state_.object_pos);
  p.put_all(state_.object_quat);
  p.put_all(state_.object_linvel);
  p.put_all(state_.object_angvel);
  p.put_all(state_.external_force);
  p.put_all(state_.fingertip_wrench);
  p.put_all(state_.fault);
  for (const EnvSlot& s : slots_) {
    p.put(s.params.object_scale);
    p.put(s.params.object_mass);
    p.put(s.params.object_friction);
    p.put(s.params.table_friction);
    p.put_all(s.params.joint_pos_offset);
    p.put_all(s.params.joint_vel_offset);
    p.put_all(s.params.torque_offset);
    p.put(s.params.cube_pos_offset);
    p.put(s.params.cube_rot_offset);
    p.put(s.goal.pose);
    p.put(s.camera.held);
    p.put(s.camera.last_q);
    p.put(s.camera.has_last ? 1.0 : 0.0);
    p.put(s.observed);
    p.put(static_cast<double>(s.episode_step));
    p.put(static_cast<double>(s.episode_index));
    p.put(static_cast<double>(s.tick));
    p.put_all(s.last_action);
    for (int f = 0; f < kNumFingers; ++f) {
      p.put(s.prev.fingertip_pos[f]);
      p.put(s.prev.fingertip_vel[f]);
    }
    p.put(s.prev.object);
    p.put(s.episode_return);
    p.put(s.success_any ? 1.0 : 0.0);
  }
  return out;
}

void BatchedEnv::restore(std::span<const double> data) {
  Unpacker u(data);
  if (static_cast<int>(u.get()) != num_envs()) throw std::invalid_argument("env snapshot: num_envs mismatch");
  state_.step_count = static_cast<std::uint64_t>(u.get());
  u.get_all(state_.joint_pos);
  u.get_all(state_.joint_vel);
  u.get_all(state_.joint_torque);
  u.get_all(state_.object_pos);
  u.get_all(state_.object_quat);
  u.get_all(state_.object_linvel);
  u.get_all(state_.object_angvel);
  u.get_all(state_.external_force);
  u.get_all(state_.fingertip_wrench);
  u.get_all(state_.fault);
  for (int i = 0; i < num_envs(); ++i) {
    EnvSlot& s = slots_[i];
    s.params.object_scale = u.get();
    s.params.object_mass = u.get();
    s.params.object_friction = u.get();
    s.params.table_friction = u.get();
    u.get_all(s.params.joint_pos_offset);
    u.get_all(s.params.joint_vel_offset);
    u.get_all(s.params.torque_offset);
    s.params.cube_pos_offset = u.get_vec();
    s.params.cube_rot_offset = u.get_vec();
    s.props = body_props(config_.physics.object, s.params, config_.physics.contact);
    params_buf_[i] = s.params;
    s.goal = make_goal(u.get_pose(), local_);
    s.camera.held = u.get_pose();
    s.camera.last_q = u.get_quat();
    s.camera.has_last = u.get() != 0.0;
    s.observed = u.get_pose();
    s.episode_step = static_cast<int>(u.get());
    s.episode_index = static_cast<std::uint64_t>(u.get());
    s.tick = static_cast<std::uint64_t>(u.get());
    u.get_all(s.last_action);
    for (int f = 0; f < kNumFingers; ++f) {
      s.prev.fingertip_pos[f] = u.get_vec();
      s.prev.fingertip_vel[f] = u.get_vec();
    }
    s.prev.object = u.get_pose();
    s.episode_return = u.get();
    s.success_any = u.get() != 0.0;
  }
  if (!u.done()) throw std::invalid_argument("env snapshot: trailing data");
  for (int i = 0; i < num_envs(); ++i) write_observations(i);
}

}  // namespace reposer
