#include "reposer/domrand.hpp"

#include <algorithm>
#include <stdexcept>

namespace reposer {

void NoiseSpec::validate() const {
  if (!(sigma >= 0.0) || !(sigma_corr >= 0.0)) throw std::invalid_argument("noise: sigma values must be >= 0");
  if (!(lo <= hi)) throw std::invalid_argument("noise: clamp range must satisfy lo <= hi");
}

void DRConfig::validate() const {
  for (const NoiseSpec* s : {&cube_position, &cube_orientation, &joint_position, &joint_velocity, &torque})
    s->validate();
  for (const UniformRange* r : {&object_scale, &object_mass, &object_friction, &table_friction}) {
    if (!(r->lo > 0.0) || !(r->lo <= r->hi)) throw std::invalid_argument("domrand: scaling ranges need 0 < lo <= hi");
  }
  if (external_force.probability < 0.0 || external_force.probability > 1.0)
    throw std::invalid_argument("domrand: external force probability must be in [0, 1]");
  if (external_force.decay < 0.0 || external_force.decay > 1.0)
    throw std::invalid_argument("domrand: external force decay must be in [0, 1]");
  if (external_force.scale < 0.0) throw std::invalid_argument("domrand: external force scale must be >= 0");
}

DRConfig DRConfig::disabled() {
  DRConfig c;
  c.enabled = false;
  for (NoiseSpec* s : {&c.cube_position, &c.cube_orientation, &c.joint_position, &c.joint_velocity, &c.torque}) {
    s->sigma = 0.0;
    s->sigma_corr = 0.0;
  }
  for (UniformRange* r : {&c.object_scale, &c.object_mass, &c.object_friction, &c.table_friction}) *r = {1.0, 1.0};
  c.external_force.enabled = false;
  return c;
}

namespace {

double draw(CounterRng& rng, const UniformRange& r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

double draw_offset(CounterRng& rng, double sigma) { return sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0; }

}  // namespace

EnvParams sample_episode_randomization(CounterRng& rng, const DRConfig& config) {
  EnvParams p;
  if (!config.enabled) return p;
  p.object_scale = draw(rng, config.object_scale);
  p.object_mass = draw(rng, config.object_mass);
  p.object_friction = draw(rng, config.object_friction);
  p.table_friction = draw(rng, config.table_friction);
  for (double& o : p.joint_pos_offset) o = draw_offset(rng, config.joint_position.sigma_corr);
  for (double& o : p.joint_vel_offset) o = draw_offset(rng, config.joint_velocity.sigma_corr);
  for (double& o : p.torque_offset) o = draw_offset(rng, config.torque.sigma_corr);
  p.cube_pos_offset = {draw_offset(rng, config.cube_position.sigma_corr),
                       draw_offset(rng, config.cube_position.sigma_corr),
                       draw_offset(rng, config.cube_position.sigma_corr)};
  if (config.cube_orientation.sigma_corr > 0.0)
    p.cube_rot_offset = rng.unit_vector() * rng.normal(0.0, config.cube_orientation.sigma_corr);
  return p;
}

double apply_observation_noise(double value, const NoiseSpec& spec, double episode_offset, CounterRng& rng) {
  if (spec.sigma == 0.0 && episode_offset == 0.0) return value;
  double v = value + episode_offset;
  if (spec.sigma > 0.0) v += rng.normal(0.0, spec.sigma);
  return std::clamp(v, spec.lo, spec.hi);
}

void apply_observation_noise(std::span<double> values, const NoiseSpec& spec,
                             std::span<const double> episode_offsets, CounterRng& rng) {
  if (episode_offsets.size() != values.size())
    throw std::invalid_argument("apply_observation_noise: offsets and values differ in length");
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = apply_observation_noise(values[i], spec, episode_offsets[i], rng);
}

Pose apply_pose_noise(const Pose& pose, const DRConfig& config, const EnvParams& params, CounterRng& rng) {
  if (!config.enabled) return pose;
  Pose out = pose;
  const NoiseSpec& ps = config.cube_position;
  out.translation = {apply_observation_noise(pose.translation.x, ps, params.cube_pos_offset.x, rng),
                     apply_observation_noise(pose.translation.y, ps, params.cube_pos_offset.y, rng),
                     apply_observation_noise(pose.translation.z, ps, params.cube_pos_offset.z, rng)};
  const NoiseSpec& os = config.cube_orientation;
  Quaternion q = pose.rotation;
  if (norm(params.cube_rot_offset) > 0.0)
    q = Quaternion::from_axis_angle(params.cube_rot_offset, norm(params.cube_rot_offset)) * q;
  if (os.sigma > 0.0) {
    const Vec3 axis = rng.unit_vector();
    q = Quaternion::from_axis_angle(axis, rng.normal(0.0, os.sigma)) * q;
  }
  q = {std::clamp(q.x, os.lo, os.hi), std::clamp(q.y, os.lo, os.hi), std::clamp(q.z, os.lo, os.hi),
       std::clamp(q.w, os.lo, os.hi)};
  out.rotation = q.normalized();
  return out;
}

void apply_action_noise(std::span<double> torques, const NoiseSpec& spec, std::span<const double> episode_offsets,
                        CounterRng& rng) {
  if (episode_offsets.size() != torques.size())
    throw std::invalid_argument("apply_action_noise: offsets and torques differ in length");
  for (std::size_t i = 0; i < torques.size(); ++i) {
    double t = torques[i] + episode_offsets[i];
    if (spec.sigma > 0.0) t += rng.normal(0.0, spec.sigma);
    torques[i] = std::clamp(t, spec.lo, spec.hi);
  }
}

}  // namespace reposer
