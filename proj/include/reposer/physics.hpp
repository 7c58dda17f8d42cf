#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "reposer/rng.hpp"
#include "reposer/spatial.hpp"

namespace reposer {

inline constexpr int kNumFingers = 3;
inline constexpr int kJointsPerFinger = 3;
inline constexpr int kNumJoints = kNumFingers * kJointsPerFinger;

/// Three-finger hand. Each finger is a yaw joint followed by two pitch joints
/// (shoulder, elbow). Fingers are mounted 120 degrees apart about the vertical
/// axis. Link gravity is assumed compensated; only the object feels gravity.
struct HandModel {
  double upper_link_length = 0.16;
  double lower_link_length = 0.16;
  double fingertip_radius = 0.0175;
  double mount_radius = 0.04;
  double mount_height = 0.29;
  double joint_lower = -2.70;
  double joint_upper = 1.57;
  // Diagonalized joint-space inertia per joint (kg m^2), same for all fingers.
  std::array<double, kJointsPerFinger> joint_inertia{0.006, 0.004, 0.0015};
  std::array<double, kJointsPerFinger> joint_damping{0.02, 0.02, 0.01};
  double max_joint_velocity = 10.0;

  void validate() const;
};

enum class ObjectShape { Cuboid, Sphere };

struct ObjectSpec {
  ObjectShape shape = ObjectShape::Cuboid;
  Vec3 half_extents{0.0325, 0.0325, 0.0325};
  double radius = 0.0375;
  double mass = 0.094;
  double friction = 1.0;

  void validate() const;
};

struct ContactParams {
  // Per contact point, for an object of reference_mass. Contacts touching
  // the object scale both with its actual mass so the contact frequency (and
  // with it the stability margin of the explicit substep) does not depend on
  // mass randomization. A resting cube on four corners sinks m g / (4 k).
  double stiffness = 2000.0;
  double damping = 5.0;
  double reference_mass = 0.094;
  // Tangential slip speed at which regularized Coulomb friction saturates.
  double friction_velocity = 0.03;
  double table_friction = 0.8;
  double fingertip_friction = 1.0;
};

struct PhysicsConfig {
  double dt = 0.02;
  int substeps = 10;
  double gravity = 9.81;
  double max_linear_speed = 5.0;
  double max_angular_speed = 50.0;
  HandModel hand;
  ObjectSpec object;
  ContactParams contact;

  void validate() const;
};

/// Randomized per-episode environment factors plus correlated noise offsets.
/// Factors scale the nominal values of the object and table.
struct EnvParams {
  double object_scale = 1.0;
  double object_mass = 1.0;
  double object_friction = 1.0;
  double table_friction = 1.0;
  std::array<double, kNumJoints> joint_pos_offset{};
  std::array<double, kNumJoints> joint_vel_offset{};
  std::array<double, kNumJoints> torque_offset{};
  Vec3 cube_pos_offset{};
  Vec3 cube_rot_offset{};  // rotation vector

  void validate() const;
};

/// Physical properties of one env's object after applying EnvParams.
struct BodyProps {
  ObjectShape shape = ObjectShape::Cuboid;
  Vec3 half_extents;
  double radius = 0.0;
  double mass = 0.0;
  Vec3 inertia;  // principal moments, body frame
  double friction = 0.0;
  double table_friction = 0.0;
  // Contact spring-damper for contacts involving the object.
  double contact_stiffness = 0.0;
  double contact_damping = 0.0;
};

BodyProps body_props(const ObjectSpec& spec, const EnvParams& params, const ContactParams& contact);

/// Batched state, structure-of-arrays. Every per-env field has shape
/// (num_envs x dim) stored row-major.
struct SimState {
  explicit SimState(int n = 0);

  int num_envs = 0;
  std::uint64_t step_count = 0;
  std::vector<double> joint_pos;     // N x 9
  std::vector<double> joint_vel;     // N x 9
  std::vector<double> joint_torque;  // N x 9, last applied
  std::vector<double> object_pos;    // N x 3
  std::vector<double> object_quat;   // N x 4 (x, y, z, w)
  std::vector<double> object_linvel; // N x 3
  std::vector<double> object_angvel; // N x 3, world frame
  std::vector<double> external_force;  // N x 3
  std::vector<double> fingertip_wrench;  // N x 18, step-averaged contact force/torque
  std::vector<std::uint8_t> fault;   // N

  Pose object_pose(int env) const;
  void set_object_pose(int env, const Pose& pose);
  Vec3 object_linear_velocity(int env) const;
  Vec3 object_angular_velocity(int env) const;
  bool operator==(const SimState&) const = default;
};

struct FingertipState {
  std::array<Pose, kNumFingers> pose;
  std::array<Vec3, kNumFingers> linear_velocity;
  std::array<Vec3, kNumFingers> angular_velocity;
};

struct FingerKinematics {
  Vec3 base;
  Vec3 elbow;
  Vec3 tip;
  Quaternion tip_rotation;
  Vec3 yaw_axis;
  Vec3 pitch_axis;
};

class Physics {
 public:
  explicit Physics(PhysicsConfig config);

  const PhysicsConfig& config() const { return config_; }
  const HandModel& hand() const { return config_.hand; }

  FingerKinematics finger_kinematics(int finger, std::span<const double, kJointsPerFinger> q) const;
  std::array<Pose, kNumFingers> forward_kinematics(std::span<const double, kNumJoints> q) const;
  FingertipState fingertip_state(std::span<const double, kNumJoints> q,
                                 std::span<const double, kNumJoints> qd) const;
  std::array<Vec3, kNumFingers> fingertip_positions(std::span<const double, kNumJoints> q) const;

  /// Advances envs [begin, end) by one control step of config().dt. A torque
  /// row or resulting state that is not finite restores that env's previous
  /// state and raises its fault flag.
  void step(SimState& state, std::span<const double> torques, std::span<const EnvParams> params,
            int begin, int end) const;
  void step(SimState& state, std::span<const double> torques, std::span<const EnvParams> params) const {
    step(state, torques, params, 0, state.num_envs);
  }

  /// Height of the object's center when resting flat on the table under
  /// gravity with the penalty contact at equilibrium.
  double resting_height(const BodyProps& props) const;

  /// Total mechanical energy of the object (kinetic + gravitational).
  double object_energy(const SimState& state, int env, const BodyProps& props) const;

 private:
  void step_env(SimState& state, int env, std::span<const double, kNumJoints> torque,
                const BodyProps& props) const;

  PhysicsConfig config_;
};

struct ExternalForceConfig {
  bool enabled = true;
  double probability = 0.1;
  double scale = 1.0;
  double decay = 0.8;
};

/// Decays the env's current external force, then with the configured
/// probability replaces it with a fresh random force whose expected magnitude
/// is scale * mass * g.
void apply_external_force(SimState& state, int env, CounterRng& rng, const ExternalForceConfig& config,
                          double object_mass, double gravity);

}  // namespace reposer
