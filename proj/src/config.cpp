#include "reposer/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "reposer/checkpoint.hpp"

namespace reposer {

using ojson = nlohmann::ordered_json;

namespace {

// Every config leaf, in file order. The same table drives serialization and
// parsing so the two can't drift apart.
template <typename V>
void visit(V& v, EngineConfig& c) {
  v("profile", c.profile);

  auto& p = c.physics;
  v("physics.dt", p.dt);
  v("physics.substeps", p.substeps);
  v("physics.gravity", p.gravity);
  v("physics.max_linear_speed", p.max_linear_speed);
  v("physics.max_angular_speed", p.max_angular_speed);
  v("physics.hand.upper_link_length", p.hand.upper_link_length);
  v("physics.hand.lower_link_length", p.hand.lower_link_length);
  v("physics.hand.fingertip_radius", p.hand.fingertip_radius);
  v("physics.hand.mount_radius", p.hand.mount_radius);
  v("physics.hand.mount_height", p.hand.mount_height);
  v("physics.hand.joint_lower", p.hand.joint_lower);
  v("physics.hand.joint_upper", p.hand.joint_upper);
  v("physics.hand.joint_inertia", p.hand.joint_inertia);
  v("physics.hand.joint_damping", p.hand.joint_damping);
  v("physics.hand.max_joint_velocity", p.hand.max_joint_velocity);
  v("physics.object.shape", p.object.shape);
  v("physics.object.half_extents", p.object.half_extents);
  v("physics.object.radius", p.object.radius);
  v("physics.object.mass", p.object.mass);
  v("physics.object.friction", p.object.friction);
  v("physics.contact.stiffness", p.contact.stiffness);
  v("physics.contact.damping", p.contact.damping);
  v("physics.contact.reference_mass", p.contact.reference_mass);
  v("physics.contact.friction_velocity", p.contact.friction_velocity);
  v("physics.contact.table_friction", p.contact.table_friction);
  v("physics.contact.fingertip_friction", p.contact.fingertip_friction);

  auto& t = c.task;
  v("task.episode_length", t.episode_length);
  v("task.success.position", t.success.position);
  v("task.success.rotation", t.success.rotation);
  v("task.w_fingertip_to_object", t.w_fingertip_to_object);
  v("task.w_fingertip_velocity", t.w_fingertip_velocity);
  v("task.w_object_goal", t.w_object_goal);
  v("task.keypoint_kernel.a", t.keypoint_kernel.a);
  v("task.keypoint_kernel.b", t.keypoint_kernel.b);
  v("task.posquat_kernel.a", t.posquat_kernel.a);
  v("task.posquat_kernel.b", t.posquat_kernel.b);
  v("task.curriculum_cutoff", t.curriculum_cutoff);
  v("task.keypoint_half_extent", t.keypoint_half_extent);
  v("task.goal_radius", t.goal_radius);
  v("task.goal_z_min", t.goal_z_min);
  v("task.goal_z_max", t.goal_z_max);
  v("task.goal_yaw_only", t.goal_yaw_only);
  v("task.spawn_radius", t.spawn_radius);
  v("task.joint_init_noise", t.joint_init_noise);
  v("task.observation", t.observation);
  v("task.reward", t.reward);
  v("task.camera_period", t.camera_period);
  v("task.camera_sign_flip_prob", t.camera_sign_flip_prob);
  v("task.torque_limit", t.torque_limit);
  v("task.safety_damping", t.safety_damping);

  auto& d = c.dr;
  v("dr.enabled", d.enabled);
  auto noise = [&](const std::string& name, NoiseSpec& n) {
    v("dr." + name + ".sigma", n.sigma);
    v("dr." + name + ".sigma_corr", n.sigma_corr);
    v("dr." + name + ".lo", n.lo);
    v("dr." + name + ".hi", n.hi);
  };
  noise("cube_position", d.cube_position);
  noise("cube_orientation", d.cube_orientation);
  noise("joint_position", d.joint_position);
  noise("joint_velocity", d.joint_velocity);
  noise("torque", d.torque);
  auto range = [&](const std::string& name, UniformRange& r) {
    v("dr." + name + ".lo", r.lo);
    v("dr." + name + ".hi", r.hi);
  };
  range("object_scale", d.object_scale);
  range("object_mass", d.object_mass);
  range("object_friction", d.object_friction);
  range("table_friction", d.table_friction);
  v("dr.external_force.enabled", d.external_force.enabled);
  v("dr.external_force.probability", d.external_force.probability);
  v("dr.external_force.scale", d.external_force.scale);
  v("dr.external_force.decay", d.external_force.decay);

  auto& o = c.ppo;
  v("ppo.gamma", o.gamma);
  v("ppo.tau", o.tau);
  v("ppo.lr_start", o.lr_start);
  v("ppo.lr_end", o.lr_end);
  v("ppo.batch_size", o.batch_size);
  v("ppo.minibatch_size", o.minibatch_size);
  v("ppo.epochs", o.epochs);
  v("ppo.clip", o.clip);
  v("ppo.entropy_coef", o.entropy_coef);
  v("ppo.value_coef", o.value_coef);
  v("ppo.max_grad_norm", o.max_grad_norm);
  v("ppo.reward_scale", o.reward_scale);
  v("ppo.normalize_obs", o.normalize_obs);
  v("ppo.actor_hidden", o.actor_hidden);
  v("ppo.critic_hidden", o.critic_hidden);
  v("ppo.init_std", o.init_std);
  v("ppo.log_std_min", o.log_std_min);
  v("ppo.log_std_max", o.log_std_max);

  auto& r = c.reach;
  v("reach.episode_length", r.episode_length);
  v("reach.max_step", r.max_step);
  v("reach.arena_radius", r.arena_radius);
  v("reach.goal_radius", r.goal_radius);
  v("reach.kernel.a", r.kernel.a);
  v("reach.kernel.b", r.kernel.b);
  v("reach.success_radius", r.success_radius);

  auto& h = c.harness;
  v("harness.eval_episodes", h.eval_episodes);
  v("harness.eval_envs", h.eval_envs);
  v("harness.eval_seed", h.eval_seed);
  v("harness.seeds", h.seeds);
  v("harness.curve_points", h.curve_points);
  v("harness.ablation_dr", h.ablation_dr);
  v("harness.scale_grid", h.scale_grid);
  v("harness.mass_grid", h.mass_grid);
  v("harness.pos_thresholds", h.pos_thresholds);
  v("harness.rot_thresholds_deg", h.rot_thresholds_deg);
  v("harness.objects", h.objects);
  v("harness.ci_level", h.ci_level);

  auto& u = c.run;
  v("run.task", u.task);
  v("run.seed", u.seed);
  v("run.total_steps", u.total_steps);
  v("run.num_envs", u.num_envs);
  v("run.output_dir", u.output_dir);
  v("run.checkpoint_interval", u.checkpoint_interval);
  v("run.workers", u.workers);
  v("run.log_timing", u.log_timing);
}

ojson::json_pointer pointer(const std::string& dotted) {
  std::string p = "/" + dotted;
  for (char& ch : p)
    if (ch == '.') ch = '/';
  return ojson::json_pointer(p);
}

ojson encode(const Vec3& x) { return ojson::array({x.x, x.y, x.z}); }
ojson encode(PoseRepr r) { return to_string(r); }
ojson encode(ObjectShape s) { return s == ObjectShape::Sphere ? "sphere" : "cuboid"; }
template <typename T>
ojson encode(const T& x) {
  return ojson(x);
}

struct Writer {
  ojson tree = ojson::object();
  template <typename T>
  void operator()(const std::string& path, T& value) {
    tree[pointer(path)] = encode(value);
  }
};

struct Reader {
  const ojson& tree;
  std::vector<std::string>& issues;

  template <typename T>
  void operator()(const std::string& path, T& value) {
    const auto ptr = pointer(path);
    if (!tree.contains(ptr)) return;
    try {
      decode(tree.at(ptr), value);
    } catch (const std::exception& e) {
      issues.push_back(path + ": " + e.what());
    }
  }

  template <typename I>
  static void decode_integer(const ojson& j, I& out) {
    if (j.is_number_integer()) {
      if constexpr (std::is_unsigned_v<I>) {
        if (j.is_number_unsigned() || j.get<std::int64_t>() >= 0) {
          out = j.get<I>();
          return;
        }
        throw std::invalid_argument("expected a non-negative integer");
      }
      out = j.get<I>();
      return;
    }
    if (j.is_number_float()) {
      const double d = j.get<double>();
      if (std::isfinite(d) && d == std::floor(d) && (!std::is_unsigned_v<I> || d >= 0)) {
        out = static_cast<I>(d);
        return;
      }
    }
    throw std::invalid_argument("expected an integer, got " + j.dump());
  }

  static void decode(const ojson& j, double& out) {
    if (!j.is_number()) throw std::invalid_argument("expected a number, got " + j.dump());
    out = j.get<double>();
  }
  static void decode(const ojson& j, int& out) { decode_integer(j, out); }
  static void decode(const ojson& j, std::uint64_t& out) { decode_integer(j, out); }
  static void decode(const ojson& j, bool& out) {
    if (!j.is_boolean()) throw std::invalid_argument("expected true or false, got " + j.dump());
    out = j.get<bool>();
  }
  static void decode(const ojson& j, std::string& out) {
    if (!j.is_string()) throw std::invalid_argument("expected a string, got " + j.dump());
    out = j.get<std::string>();
  }
  static void decode(const ojson& j, PoseRepr& out) {
    std::string s;
    decode(j, s);
    out = pose_repr_from_string(s);
  }
  static void decode(const ojson& j, ObjectShape& out) {
    std::string s;
    decode(j, s);
    if (s == "cuboid") out = ObjectShape::Cuboid;
    else if (s == "sphere") out = ObjectShape::Sphere;
    else throw std::invalid_argument("object shape must be cuboid or sphere, got '" + s + "'");
  }
  template <typename T, std::size_t N>
  static void decode(const ojson& j, std::array<T, N>& out) {
    if (!j.is_array() || j.size() != N)
      throw std::invalid_argument("expected an array of " + std::to_string(N) + " values");
    for (std::size_t i = 0; i < N; ++i) decode(j[i], out[i]);
  }
  static void decode(const ojson& j, Vec3& out) {
    std::array<double, 3> a{};
    decode(j, a);
    out = {a[0], a[1], a[2]};
  }
  template <typename T>
  static void decode(const ojson& j, std::vector<T>& out) {
    if (!j.is_array()) throw std::invalid_argument("expected an array, got " + j.dump());
    std::vector<T> v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      T x{};
      decode(j[i], x);
      v[i] = x;
    }
    out = std::move(v);
  }
};

void check_keys(const ojson& defaults, const nlohmann::json& overlay, const std::string& prefix,
                std::vector<std::string>& issues) {
  if (!overlay.is_object()) {
    issues.push_back((prefix.empty() ? std::string("config") : prefix) + ": expected a table of keys");
    return;
  }
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) {
      issues.push_back(path + ": unknown key");
      continue;
    }
    const ojson& def = defaults.at(it.key());
    if (def.is_object()) check_keys(def, it.value(), path, issues);
    else if (it.value().is_object()) issues.push_back(path + ": expected a value, got a table");
  }
}

void add_if(std::vector<std::string>& issues, const char* where, const auto& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    issues.push_back(std::string(where) + ": " + e.what());
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error([&] {
        std::string s = "invalid config:";
        for (const auto& i : issues) s += "\n  " + i;
        return s;
      }()),
      issues_(std::move(issues)) {}

void HarnessConfig::validate() const {
  if (eval_episodes < 0) throw std::invalid_argument("eval_episodes must be >= 0");
  if (eval_envs <= 0) throw std::invalid_argument("eval_envs must be > 0");
  if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
  if (curve_points < 1) throw std::invalid_argument("curve_points must be >= 1");
  for (double x : pos_thresholds)
    if (!(x > 0)) throw std::invalid_argument("pos_thresholds must be positive");
  for (double x : rot_thresholds_deg)
    if (!(x > 0)) throw std::invalid_argument("rot_thresholds_deg must be positive");
  for (double x : scale_grid)
    if (!(x > 0)) throw std::invalid_argument("scale_grid values must be positive");
  for (double x : mass_grid)
    if (!(x > 0)) throw std::invalid_argument("mass_grid values must be positive");
  if (!(ci_level > 0 && ci_level < 1)) throw std::invalid_argument("ci_level must be in (0, 1)");
}

void RunConfig::validate() const {
  if (task != "cube" && task != "reach") throw std::invalid_argument("task must be cube or reach, got '" + task + "'");
  if (num_envs <= 0) throw std::invalid_argument("num_envs must be > 0");
  if (checkpoint_interval < 0) throw std::invalid_argument("checkpoint_interval must be >= 0");
  if (workers <= 0) throw std::invalid_argument("workers must be > 0");
  if (output_dir.empty()) throw std::invalid_argument("output_dir must not be empty");
}

void EngineConfig::validate() const {
  std::vector<std::string> issues;
  add_if(issues, "physics", [&] { physics.validate(); });
  add_if(issues, "task/dr", [&] { env().validate(); });
  add_if(issues, "ppo", [&] { ppo.validate(); });
  add_if(issues, "ppo", [&] { ppo.horizon(run.num_envs); });
  add_if(issues, "reach", [&] { reach.validate(); });
  add_if(issues, "harness", [&] { harness.validate(); });
  add_if(issues, "run", [&] { run.validate(); });
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

nlohmann::ordered_json to_json(const EngineConfig& config) {
  Writer w;
  EngineConfig copy = config;
  visit(w, copy);
  return w.tree;
}

EngineConfig apply_overlay(const EngineConfig& base, const nlohmann::json& overlay) {
  std::vector<std::string> issues;
  const ojson defaults = to_json(base);
  check_keys(defaults, overlay, "", issues);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  EngineConfig out = base;
  const ojson tree = ojson::parse(overlay.dump());
  Reader r{tree, issues};
  visit(r, out);
  if (!issues.empty()) throw ConfigError(std::move(issues));
  out.validate();
  return out;
}

const std::vector<std::string>& profile_names() {
  static const std::vector<std::string> names{"paper", "desk", "smoke", "reach"};
  return names;
}

EngineConfig make_profile(const std::string& name) {
  EngineConfig c;
  c.profile = name;
  if (name == "paper") {
    // Defaults as constructed.
  } else if (name == "desk") {
    c.run.num_envs = 4096;
    c.run.total_steps = 80'000'000;
    c.run.checkpoint_interval = 20;
  } else if (name == "smoke") {
    c.run.num_envs = 64;
    c.run.total_steps = 8192;
    c.run.checkpoint_interval = 1;
    c.task.episode_length = 50;
    c.ppo.batch_size = 2048;
    c.ppo.minibatch_size = 1024;
    c.ppo.epochs = 2;
    c.ppo.actor_hidden = {64, 64};
    c.ppo.critic_hidden = {64, 64};
    c.harness.eval_episodes = 32;
    c.harness.eval_envs = 32;
    c.harness.seeds = {0};
    c.harness.curve_points = 2;
    c.harness.scale_grid = {0.8, 1.0, 1.2};
    c.harness.mass_grid = {0.5, 1.0, 2.0};
    c.harness.objects = {"cube_6.5cm", "ball_r3.75cm", "cuboid_2x8x2cm"};
  } else if (name == "reach") {
    c.run.task = "reach";
    c.run.num_envs = 256;
    c.run.total_steps = 640'000;
    c.run.checkpoint_interval = 0;
    c.ppo.batch_size = 256 * 50;
    c.ppo.minibatch_size = 3200;
    c.ppo.epochs = 5;
    c.ppo.lr_start = 1e-3;
    c.ppo.gamma = 0.95;
    c.ppo.lr_end = 1e-4;
    c.ppo.reward_scale = 1.0;
    c.ppo.init_std = 0.5;
    c.ppo.actor_hidden = {64, 64};
    c.ppo.critic_hidden = {64, 64};
    c.harness.eval_episodes = 256;
    c.harness.eval_envs = 256;
  } else {
    std::string known;
    for (const auto& n : profile_names()) known += " " + n;
    throw ConfigError({"profile: unknown profile '" + name + "' (known:" + known + ")"});
  }
  return c;
}

EngineConfig from_json(const nlohmann::json& tree) {
  std::string profile = "paper";
  if (tree.is_object() && tree.contains("profile")) {
    if (!tree["profile"].is_string()) throw ConfigError({"profile: expected a string"});
    profile = tree["profile"].get<std::string>();
  }
  return apply_overlay(make_profile(profile), tree);
}

void apply_set(nlohmann::json& overlay, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError({"--set " + assignment + ": expected section.key=value"});
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  std::string p = "/" + key;
  for (char& ch : p)
    if (ch == '.') ch = '/';
  try {
    overlay[nlohmann::json::json_pointer(p)] = value;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({"--set " + assignment + ": " + e.what()});
  }
}

EngineConfig load_config(const std::optional<std::string>& path, const std::optional<std::string>& profile,
                         const std::vector<std::string>& sets) {
  nlohmann::json overlay = nlohmann::json::object();
  if (path) {
    std::ifstream f(*path);
    if (!f) throw ConfigError({"cannot read config file '" + *path + "'"});
    try {
      overlay = nlohmann::json::parse(f, nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError({*path + ": " + e.what()});
    }
    if (!overlay.is_object()) throw ConfigError({*path + ": expected a table of keys at the top level"});
  }
  for (const auto& s : sets) apply_set(overlay, s);
  if (profile) {
    if (overlay.contains("profile") && overlay["profile"] != *profile)
      throw ConfigError({"profile: --profile " + *profile + " conflicts with the config file's profile"});
    overlay["profile"] = *profile;
  }
  return from_json(overlay);
}

std::string config_hash(const EngineConfig& config) {
  // Settings that change where or how often things are written, or how the
  // work is split across threads, leave every result unchanged.
  EngineConfig c = config;
  const RunConfig defaults;
  c.run.output_dir = defaults.output_dir;
  c.run.checkpoint_interval = defaults.checkpoint_interval;
  c.run.workers = defaults.workers;
  c.run.log_timing = defaults.log_timing;
  return string_hash(to_json(c).dump());
}

}  // namespace reposer
