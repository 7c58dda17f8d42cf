#include "reposer/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace reposer {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

// Spring-damper normal force plus regularized Coulomb friction. `normal`
// points from the second body toward the first; `rel_vel` is the velocity of
// the first body's contact point relative to the second's.
Vec3 penalty_force(double penetration, const Vec3& normal, const Vec3& rel_vel, double mu, double stiffness,
                   double damping, const ContactParams& c) {
  const double vn = dot(rel_vel, normal);
  const double fn = std::max(0.0, stiffness * penetration - damping * vn);
  if (fn == 0.0) return {};
  const Vec3 vt = rel_vel - normal * vn;
  const double vt2 = dot(vt, vt);
  const double eps = c.friction_velocity;
  const Vec3 ft = vt * (-mu * fn / std::sqrt(vt2 + eps * eps));
  return normal * fn + ft;
}

Vec3 clamp_norm(const Vec3& v, double max_norm) {
  const double n = norm(v);
  return n > max_norm ? v * (max_norm / n) : v;
}

}  // namespace

void HandModel::validate() const {
  require(upper_link_length > 0 && lower_link_length > 0, "hand: link lengths must be > 0");
  require(fingertip_radius > 0, "hand: fingertip_radius must be > 0");
  require(mount_height > 0, "hand: mount_height must be > 0");
  require(joint_lower < joint_upper, "hand: joint_lower must be < joint_upper");
  for (int j = 0; j < kJointsPerFinger; ++j) {
    require(joint_inertia[j] > 0, "hand: joint_inertia must be > 0");
    require(joint_damping[j] > 0, "hand: joint_damping must be > 0");
  }
  require(max_joint_velocity > 0, "hand: max_joint_velocity must be > 0");
}

void ObjectSpec::validate() const {
  if (shape == ObjectShape::Cuboid) {
    require(half_extents.x > 0 && half_extents.y > 0 && half_extents.z > 0,
            "object: half_extents must be > 0");
  } else {
    require(radius > 0, "object: radius must be > 0");
  }
  require(mass > 0, "object: mass must be > 0");
  require(friction >= 0, "object: friction must be >= 0");
}

void PhysicsConfig::validate() const {
  require(dt > 0, "physics: dt must be > 0");
  require(substeps >= 1, "physics: substeps must be >= 1");
  require(gravity >= 0, "physics: gravity must be >= 0");
  require(max_linear_speed > 0 && max_angular_speed > 0, "physics: speed caps must be > 0");
  require(contact.stiffness > 0 && contact.damping >= 0, "physics: contact stiffness/damping invalid");
  require(contact.reference_mass > 0, "physics: contact reference_mass must be > 0");
  require(contact.friction_velocity > 0, "physics: friction_velocity must be > 0");
  require(contact.table_friction >= 0 && contact.fingertip_friction >= 0, "physics: friction must be >= 0");
  hand.validate();
  object.validate();
}

void EnvParams::validate() const {
  require(object_scale > 0 && object_mass > 0 && object_friction > 0 && table_friction > 0,
          "env params: factors must be > 0");
}

BodyProps body_props(const ObjectSpec& spec, const EnvParams& params, const ContactParams& contact) {
  BodyProps p;
  p.shape = spec.shape;
  p.mass = spec.mass * params.object_mass;
  p.friction = spec.friction * params.object_friction;
  p.table_friction = contact.table_friction * params.table_friction;
  const double mass_ratio = p.mass / contact.reference_mass;
  p.contact_stiffness = contact.stiffness * mass_ratio;
  p.contact_damping = contact.damping * mass_ratio;
  if (spec.shape == ObjectShape::Cuboid) {
    p.half_extents = spec.half_extents * params.object_scale;
    const double sx = 2 * p.half_extents.x, sy = 2 * p.half_extents.y, sz = 2 * p.half_extents.z;
    p.inertia = {p.mass * (sy * sy + sz * sz) / 12.0, p.mass * (sx * sx + sz * sz) / 12.0,
                 p.mass * (sx * sx + sy * sy) / 12.0};
    p.radius = norm(p.half_extents);
  } else {
    p.radius = spec.radius * params.object_scale;
    p.half_extents = {p.radius, p.radius, p.radius};
    const double i = 0.4 * p.mass * p.radius * p.radius;
    p.inertia = {i, i, i};
  }
  return p;
}

SimState::SimState(int n)
    : num_envs(n),
      joint_pos(static_cast<std::size_t>(n) * kNumJoints, 0.0),
      joint_vel(static_cast<std::size_t>(n) * kNumJoints, 0.0),
      joint_torque(static_cast<std::size_t>(n) * kNumJoints, 0.0),
      object_pos(static_cast<std::size_t>(n) * 3, 0.0),
      object_quat(static_cast<std::size_t>(n) * 4, 0.0),
      object_linvel(static_cast<std::size_t>(n) * 3, 0.0),
      object_angvel(static_cast<std::size_t>(n) * 3, 0.0),
      external_force(static_cast<std::size_t>(n) * 3, 0.0),
      fingertip_wrench(static_cast<std::size_t>(n) * 6 * kNumFingers, 0.0),
      fault(static_cast<std::size_t>(n), 0) {
  for (int i = 0; i < n; ++i) object_quat[4 * i + 3] = 1.0;
}

Pose SimState::object_pose(int env) const {
  const double* p = &object_pos[3 * env];
  const double* q = &object_quat[4 * env];
  return {{p[0], p[1], p[2]}, {q[0], q[1], q[2], q[3]}};
}

void SimState::set_object_pose(int env, const Pose& pose) {
  double* p = &object_pos[3 * env];
  double* q = &object_quat[4 * env];
  p[0] = pose.translation.x;
  p[1] = pose.translation.y;
  p[2] = pose.translation.z;
  q[0] = pose.rotation.x;
  q[1] = pose.rotation.y;
  q[2] = pose.rotation.z;
  q[3] = pose.rotation.w;
}

Vec3 SimState::object_linear_velocity(int env) const {
  const double* v = &object_linvel[3 * env];
  return {v[0], v[1], v[2]};
}

Vec3 SimState::object_angular_velocity(int env) const {
  const double* v = &object_angvel[3 * env];
  return {v[0], v[1], v[2]};
}

Physics::Physics(PhysicsConfig config) : config_(std::move(config)) { config_.validate(); }

FingerKinematics Physics::finger_kinematics(int finger, std::span<const double, kJointsPerFinger> q) const {
  const HandModel& h = config_.hand;
  const double mount_angle = finger * 2.0 * std::numbers::pi / kNumFingers;
  const double yaw = mount_angle + q[0];
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double c1 = std::cos(q[1]), s1 = std::sin(q[1]);
  const double c12 = std::cos(q[1] + q[2]), s12 = std::sin(q[1] + q[2]);

  FingerKinematics k;
  k.base = {h.mount_radius * std::cos(mount_angle), h.mount_radius * std::sin(mount_angle), h.mount_height};
  // In the yawed finger frame the upper link points inward (-x) at zero and
  // positive pitch lowers it.
  const double ex = -h.upper_link_length * c1, ez = -h.upper_link_length * s1;
  const double tx = ex + h.lower_link_length * s12, tz = ez - h.lower_link_length * c12;
  k.elbow = k.base + Vec3{cy * ex, sy * ex, ez};
  k.tip = k.base + Vec3{cy * tx, sy * tx, tz};
  k.yaw_axis = {0.0, 0.0, 1.0};
  k.pitch_axis = {sy, -cy, 0.0};
  k.tip_rotation = Quaternion::from_axis_angle({0, 0, 1}, yaw) *
                   Quaternion::from_axis_angle({0, -1, 0}, q[1] + q[2]);
  return k;
}

std::array<Pose, kNumFingers> Physics::forward_kinematics(std::span<const double, kNumJoints> q) const {
  std::array<Pose, kNumFingers> out;
  for (int f = 0; f < kNumFingers; ++f) {
    const auto k = finger_kinematics(f, std::span<const double, kJointsPerFinger>(q.data() + 3 * f, 3));
    out[f] = {k.tip, k.tip_rotation};
  }
  return out;
}

std::array<Vec3, kNumFingers> Physics::fingertip_positions(std::span<const double, kNumJoints> q) const {
  std::array<Vec3, kNumFingers> out;
  for (int f = 0; f < kNumFingers; ++f)
    out[f] = finger_kinematics(f, std::span<const double, kJointsPerFinger>(q.data() + 3 * f, 3)).tip;
  return out;
}

FingertipState Physics::fingertip_state(std::span<const double, kNumJoints> q,
                                        std::span<const double, kNumJoints> qd) const {
  FingertipState s;
  for (int f = 0; f < kNumFingers; ++f) {
    const auto k = finger_kinematics(f, std::span<const double, kJointsPerFinger>(q.data() + 3 * f, 3));
    const double* v = qd.data() + 3 * f;
    s.pose[f] = {k.tip, k.tip_rotation};
    s.linear_velocity[f] = cross(k.yaw_axis, k.tip - k.base) * v[0] + cross(k.pitch_axis, k.tip - k.base) * v[1] +
                           cross(k.pitch_axis, k.tip - k.elbow) * v[2];
    s.angular_velocity[f] = k.yaw_axis * v[0] + k.pitch_axis * (v[1] + v[2]);
  }
  return s;
}

double Physics::resting_height(const BodyProps& props) const {
  const double weight = props.mass * config_.gravity;
  if (props.shape == ObjectShape::Sphere) return props.radius - weight / props.contact_stiffness;
  return props.half_extents.z - weight / (4.0 * props.contact_stiffness);
}

double Physics::object_energy(const SimState& state, int env, const BodyProps& props) const {
  const Vec3 v = state.object_linear_velocity(env);
  const Vec3 w = state.object_angular_velocity(env);
  const Quaternion q = state.object_pose(env).rotation;
  const Vec3 wb = rotate(q.conjugate(), w);
  const double rot = 0.5 * (props.inertia.x * wb.x * wb.x + props.inertia.y * wb.y * wb.y +
                            props.inertia.z * wb.z * wb.z);
  return 0.5 * props.mass * dot(v, v) + rot + props.mass * config_.gravity * state.object_pos[3 * env + 2];
}

void Physics::step(SimState& state, std::span<const double> torques, std::span<const EnvParams> params,
                   int begin, int end) const {
  if (torques.size() != static_cast<std::size_t>(state.num_envs) * kNumJoints ||
      params.size() != static_cast<std::size_t>(state.num_envs))
    throw std::invalid_argument("Physics::step: batch shape mismatch");
  for (int i = begin; i < end; ++i) {
    const BodyProps props = body_props(config_.object, params[i], config_.contact);
    step_env(state, i, std::span<const double, kNumJoints>(torques.data() + kNumJoints * i, kNumJoints), props);
  }
}

void Physics::step_env(SimState& s, int env, std::span<const double, kNumJoints> torque,
                       const BodyProps& props) const {
  const HandModel& hand = config_.hand;
  const ContactParams& cp = config_.contact;
  const double h = config_.dt / config_.substeps;

  double* q = &s.joint_pos[kNumJoints * env];
  double* qd = &s.joint_vel[kNumJoints * env];
  double* tau_out = &s.joint_torque[kNumJoints * env];
  double* wrench = &s.fingertip_wrench[6 * kNumFingers * env];

  // Snapshot for fault recovery.
  std::array<double, kNumJoints> q0, qd0, tau0;
  std::copy(q, q + kNumJoints, q0.begin());
  std::copy(qd, qd + kNumJoints, qd0.begin());
  std::copy(tau_out, tau_out + kNumJoints, tau0.begin());
  const Pose pose0 = s.object_pose(env);
  const Vec3 v0 = s.object_linear_velocity(env), w0 = s.object_angular_velocity(env);

  bool finite = true;
  for (double t : torque) finite = finite && std::isfinite(t);

  Vec3 pos = pose0.translation;
  Quaternion rot = pose0.rotation;
  Vec3 vel = v0, omega = w0;
  const Vec3 f_ext{s.external_force[3 * env], s.external_force[3 * env + 1], s.external_force[3 * env + 2]};
  const Vec3 gravity{0.0, 0.0, -config_.gravity};
  std::array<double, 6 * kNumFingers> wrench_acc{};

  for (int sub = 0; finite && sub < config_.substeps; ++sub) {
    Vec3 obj_force = f_ext;
    Vec3 obj_torque{};
    std::array<double, kNumJoints> tau_contact{};

    for (int f = 0; f < kNumFingers; ++f) {
      const auto k = finger_kinematics(f, std::span<const double, kJointsPerFinger>(q + 3 * f, 3));
      const double* v = qd + 3 * f;
      const Vec3 tip_v = cross(k.yaw_axis, k.tip - k.base) * v[0] + cross(k.pitch_axis, k.tip - k.base) * v[1] +
                         cross(k.pitch_axis, k.tip - k.elbow) * v[2];
      const Vec3 tip_w = k.yaw_axis * v[0] + k.pitch_axis * (v[1] + v[2]);
      const double r = hand.fingertip_radius;

      Vec3 tip_force{};
      Vec3 tip_torque{};
      auto add_tip_contact = [&](const Vec3& point, const Vec3& force) {
        tip_force += force;
        tip_torque += cross(point - k.tip, force);
        const Vec3 jr0 = cross(k.yaw_axis, point - k.base);
        const Vec3 jr1 = cross(k.pitch_axis, point - k.base);
        const Vec3 jr2 = cross(k.pitch_axis, point - k.elbow);
        tau_contact[3 * f + 0] += dot(jr0, force);
        tau_contact[3 * f + 1] += dot(jr1, force);
        tau_contact[3 * f + 2] += dot(jr2, force);
      };

      // Fingertip vs object.
      Vec3 normal;
      double penetration = -1.0;
      Vec3 surface_point;
      if (props.shape == ObjectShape::Sphere) {
        const Vec3 d = k.tip - pos;
        const double dist = norm(d);
        penetration = r + props.radius - dist;
        normal = dist > 1e-12 ? d / dist : Vec3{0, 0, 1};
        surface_point = pos + normal * props.radius;
      } else if (norm(k.tip - pos) < props.radius + r) {
        const Vec3 local = rotate(rot.conjugate(), k.tip - pos);
        const Vec3& he = props.half_extents;
        const Vec3 closest{std::clamp(local.x, -he.x, he.x), std::clamp(local.y, -he.y, he.y),
                           std::clamp(local.z, -he.z, he.z)};
        const Vec3 d = local - closest;
        const double dist = norm(d);
        Vec3 n_local;
        Vec3 on_surface = closest;
        if (dist > 1e-12) {
          n_local = d / dist;
          penetration = r - dist;
        } else {
          const double gx = he.x - std::abs(local.x), gy = he.y - std::abs(local.y), gz = he.z - std::abs(local.z);
          if (gx <= gy && gx <= gz) {
            n_local = {local.x >= 0 ? 1.0 : -1.0, 0, 0};
            on_surface.x = n_local.x * he.x;
            penetration = r + gx;
          } else if (gy <= gz) {
            n_local = {0, local.y >= 0 ? 1.0 : -1.0, 0};
            on_surface.y = n_local.y * he.y;
            penetration = r + gy;
          } else {
            n_local = {0, 0, local.z >= 0 ? 1.0 : -1.0};
            on_surface.z = n_local.z * he.z;
            penetration = r + gz;
          }
        }
        normal = rotate(rot, n_local);
        surface_point = pos + rotate(rot, on_surface);
      }
      if (penetration > 0.0) {
        const Vec3 tip_point = k.tip - normal * r;
        const Vec3 contact_point = (tip_point + surface_point) * 0.5;
        const Vec3 v_tip = tip_v + cross(tip_w, contact_point - k.tip);
        const Vec3 v_obj = vel + cross(omega, contact_point - pos);
        const double mu = 0.5 * (props.friction + cp.fingertip_friction);
        const Vec3 force = penalty_force(penetration, normal, v_tip - v_obj, mu, props.contact_stiffness,
                                         props.contact_damping, cp);
        add_tip_contact(contact_point, force);
        obj_force -= force;
        obj_torque -= cross(contact_point - pos, force);
      }

      // Fingertip vs table.
      if (k.tip.z < r) {
        const Vec3 point{k.tip.x, k.tip.y, 0.0};
        const Vec3 v_pt = tip_v + cross(tip_w, point - k.tip);
        add_tip_contact(point,
                        penalty_force(r - k.tip.z, {0, 0, 1}, v_pt, cp.table_friction, cp.stiffness, cp.damping, cp));
      }

      double* wr = wrench_acc.data() + 6 * f;
      wr[0] += tip_force.x;
      wr[1] += tip_force.y;
      wr[2] += tip_force.z;
      wr[3] += tip_torque.x;
      wr[4] += tip_torque.y;
      wr[5] += tip_torque.z;
    }

    // Object vs table.
    const double mu_table = 0.5 * (props.friction + props.table_friction);
    if (props.shape == ObjectShape::Sphere) {
      const double pen = props.radius - pos.z;
      if (pen > 0.0) {
        const Vec3 point{pos.x, pos.y, 0.0};
        const Vec3 v_pt = vel + cross(omega, point - pos);
        const Vec3 force =
            penalty_force(pen, {0, 0, 1}, v_pt, mu_table, props.contact_stiffness, props.contact_damping, cp);
        obj_force += force;
        obj_torque += cross(point - pos, force);
      }
    } else if (pos.z < props.radius) {
      const Vec3& he = props.half_extents;
      for (int c = 0; c < 8; ++c) {
        const Vec3 arm = rotate(rot, {(c & 1) ? he.x : -he.x, (c & 2) ? he.y : -he.y, (c & 4) ? he.z : -he.z});
        const Vec3 corner = pos + arm;
        if (corner.z >= 0.0) continue;
        const Vec3 v_pt = vel + cross(omega, arm);
        const Vec3 force = penalty_force(-corner.z, {0, 0, 1}, v_pt, mu_table, props.contact_stiffness,
                                         props.contact_damping, cp);
        obj_force += force;
        obj_torque += cross(arm, force);
      }
    }

    // Joints: exact exponential integration of I qdd = tau - d qd over the substep.
    for (int j = 0; j < kNumJoints; ++j) {
      const int jj = j % kJointsPerFinger;
      const double inertia = hand.joint_inertia[jj];
      const double damping = hand.joint_damping[jj];
      const double v_inf = (torque[j] + tau_contact[j]) / damping;
      const double decay = std::exp(-damping * h / inertia);
      const double v_new = v_inf + (qd[j] - v_inf) * decay;
      // Position from the exact integral of the velocity over the substep.
      q[j] += v_inf * h + (qd[j] - v_inf) * (1.0 - decay) * inertia / damping;
      qd[j] = v_new;
      if (q[j] < hand.joint_lower) {
        q[j] = hand.joint_lower;
        qd[j] = std::max(0.0, qd[j]);
      } else if (q[j] > hand.joint_upper) {
        q[j] = hand.joint_upper;
        qd[j] = std::min(0.0, qd[j]);
      }
    }

    // Object: semi-implicit Euler. The constant part of the acceleration
    // (gravity and the external push) is integrated exactly.
    const Vec3 const_acc = gravity + f_ext / props.mass;
    vel += (obj_force / props.mass + gravity) * h;
    const Vec3 wb = rotate(rot.conjugate(), omega);
    const Vec3 tb = rotate(rot.conjugate(), obj_torque);
    const Vec3& I = props.inertia;
    const Vec3 Iw{I.x * wb.x, I.y * wb.y, I.z * wb.z};
    const Vec3 rhs = tb - cross(wb, Iw);
    const Vec3 wb_new = wb + Vec3{rhs.x / I.x, rhs.y / I.y, rhs.z / I.z} * h;
    omega = rotate(rot, wb_new);
    vel = clamp_norm(vel, config_.max_linear_speed);
    omega = clamp_norm(omega, config_.max_angular_speed);
    pos += vel * h - const_acc * (0.5 * h * h);
    rot = integrate_angular(rot, omega, h);

    finite = isfinite(pos) && isfinite(vel) && isfinite(omega) && std::isfinite(rot.w);
    for (int j = 0; j < kNumJoints; ++j) finite = finite && std::isfinite(q[j]) && std::isfinite(qd[j]);
  }

  if (!finite) {
    std::copy(q0.begin(), q0.end(), q);
    std::copy(qd0.begin(), qd0.end(), qd);
    std::copy(tau0.begin(), tau0.end(), tau_out);
    s.set_object_pose(env, pose0);
    for (int a = 0; a < 3; ++a) {
      s.object_linvel[3 * env + a] = v0[a];
      s.object_angvel[3 * env + a] = w0[a];
    }
    s.fault[env] = 1;
    return;
  }

  std::copy(torque.begin(), torque.end(), tau_out);
  s.set_object_pose(env, {pos, rot});
  for (int a = 0; a < 3; ++a) {
    s.object_linvel[3 * env + a] = vel[a];
    s.object_angvel[3 * env + a] = omega[a];
  }
  for (int i = 0; i < 6 * kNumFingers; ++i) wrench[i] = wrench_acc[i] / config_.substeps;
}

void apply_external_force(SimState& state, int env, CounterRng& rng, const ExternalForceConfig& config,
                          double object_mass, double gravity) {
  double* f = &state.external_force[3 * env];
  if (!config.enabled) {
    f[0] = f[1] = f[2] = 0.0;
    return;
  }
  for (int a = 0; a < 3; ++a) f[a] *= config.decay;
  if (config.probability > 0.0 && rng.uniform() < config.probability) {
    const double sigma = config.scale * object_mass * gravity / std::sqrt(3.0);
    for (int a = 0; a < 3; ++a) f[a] = rng.normal(0.0, sigma);
  }
}

}  // namespace reposer
