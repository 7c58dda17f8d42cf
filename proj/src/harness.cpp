#include "reposer/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <regex>

#include "reposer/reach.hpp"

namespace reposer {

namespace {

// Standard normal quantile by bisection on erfc; only used for CI widths.
double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double deg(double x) { return x * std::numbers::pi / 180.0; }

}  // namespace

Interval wilson_interval(int successes, int n, double level) {
  if (n <= 0) return {0.0, 1.0};
  const double z = normal_quantile(0.5 + 0.5 * level);
  const double p = static_cast<double>(successes) / n;
  const double z2n = z * z / n;
  const double center = (p + 0.5 * z2n) / (1.0 + z2n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / (1.0 + z2n);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

nlohmann::ordered_json summary_json(const EvalReport& r) {
  return {{"label", r.label},
          {"n", r.n},
          {"successes", r.successes},
          {"success_rate", r.success_rate},
          {"ci_level", r.ci_level},
          {"ci_lo", r.ci.lo},
          {"ci_hi", r.ci.hi},
          {"success_any_rate", r.success_any_rate},
          {"position_rate", r.position_rate},
          {"orientation_rate", r.orientation_rate},
          {"mean_return", r.mean_return}};
}

EvalOptions eval_options(const EngineConfig& config) {
  EvalOptions o;
  o.episodes = config.harness.eval_episodes;
  o.envs = config.harness.eval_envs;
  o.seed = config.harness.eval_seed;
  return o;
}

EvalReport evaluate(const Policy& policy, const EngineConfig& config, const EvalOptions& options) {
  EvalReport rep;
  rep.label = options.label;
  rep.ci_level = config.harness.ci_level;
  rep.ci = wilson_interval(0, 0, rep.ci_level);
  if (options.episodes < 0 || options.envs <= 0) throw std::invalid_argument("evaluate: need episodes >= 0 and envs > 0");
  const int m = std::max(1, std::min(options.envs, options.episodes));

  std::unique_ptr<VecEnv> env;
  if (config.run.task == "reach") {
    if (options.fixed_params || options.object)
      throw std::invalid_argument("evaluate: object overrides only apply to the cube task");
    env = std::make_unique<ReachEnv>(config.reach, m, options.seed);
  } else {
    EnvConfig ec = config.env();
    if (!options.dr) ec.dr = DRConfig::disabled();
    if (options.object) ec.physics.object = *options.object;
    auto be = std::make_unique<BatchedEnv>(ec, m, options.seed, config.run.workers);
    if (options.fixed_params) {
      be->set_param_override(options.fixed_params);
      be->reset_all();
    }
    env = std::move(be);
  }
  policy.check_compatible(env->actor_dim(), env->critic_dim(), env->action_dim(), config.ppo);
  if (options.episodes == 0) return rep;

  // Env i runs trials i, i + m, i + 2m, ... below the requested count.
  std::vector<std::uint64_t> quota(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) quota[i] = static_cast<std::uint64_t>((options.episodes - i + m - 1) / m);
  int remaining = options.episodes;
  std::vector<Trial> trials;
  trials.reserve(static_cast<std::size_t>(options.episodes));
  while (remaining > 0) {
    env->step(policy.actions(env->actor_obs(), m), std::numeric_limits<std::uint64_t>::max());
    for (const EpisodeRecord& e : env->finished()) {
      if (e.episode >= quota[e.env_id]) continue;
      trials.push_back({e.episode, e.env_id, e.success, e.success_any, e.final_pos_err, e.final_rot_err,
                        e.episode_return, e.fault});
      --remaining;
    }
  }
  std::sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) {
    return a.episode != b.episode ? a.episode < b.episode : a.env_id < b.env_id;
  });

  rep.n = static_cast<int>(trials.size());
  int any = 0;
  double ret = 0.0;
  for (const Trial& t : trials) {
    rep.successes += t.success;
    any += t.success_any;
    ret += t.episode_return;
  }
  rep.success_rate = static_cast<double>(rep.successes) / rep.n;
  rep.success_any_rate = static_cast<double>(any) / rep.n;
  rep.mean_return = ret / rep.n;
  rep.ci = wilson_interval(rep.successes, rep.n, rep.ci_level);
  if (config.run.task == "reach") {
    rep.position_rate = rep.success_rate;
    rep.orientation_rate = 1.0;
  } else {
    const SuccessBreakdown b = success_breakdown(trials, config.task.success);
    rep.position_rate = b.position;
    rep.orientation_rate = b.orientation;
  }
  rep.trials = std::move(trials);
  return rep;
}

SuccessBreakdown success_breakdown(const std::vector<Trial>& trials, const SuccessThresholds& thresholds) {
  SuccessBreakdown b;
  if (trials.empty()) return b;
  int p = 0, r = 0, c = 0;
  for (const Trial& t : trials) {
    const bool pp = !t.fault && t.pos_err < thresholds.position;
    const bool rr = !t.fault && t.rot_err < thresholds.rotation;
    p += pp;
    r += rr;
    c += pp && rr;
  }
  const double n = static_cast<double>(trials.size());
  return {p / n, r / n, c / n};
}

Heatmap threshold_heatmap(const std::vector<Trial>& trials, std::vector<double> pos_thresholds,
                          std::vector<double> rot_thresholds_deg) {
  std::sort(pos_thresholds.begin(), pos_thresholds.end());
  std::sort(rot_thresholds_deg.begin(), rot_thresholds_deg.end());
  Heatmap h;
  h.n = static_cast<int>(trials.size());
  h.success.assign(pos_thresholds.size(), std::vector<double>(rot_thresholds_deg.size(), 0.0));
  for (std::size_t i = 0; i < pos_thresholds.size(); ++i)
    for (std::size_t j = 0; j < rot_thresholds_deg.size(); ++j)
      h.success[i][j] = success_breakdown(trials, {pos_thresholds[i], deg(rot_thresholds_deg[j])}).combined;
  h.pos_thresholds = std::move(pos_thresholds);
  h.rot_thresholds_deg = std::move(rot_thresholds_deg);
  return h;
}

SweepParam sweep_param_from_string(const std::string& s) {
  if (s == "scale") return SweepParam::Scale;
  if (s == "mass") return SweepParam::Mass;
  throw std::invalid_argument("sweep parameter must be scale or mass, got '" + s + "'");
}

std::string to_string(SweepParam p) { return p == SweepParam::Scale ? "scale" : "mass"; }

std::vector<SweepPoint> robustness_sweep(const Policy& policy, const EngineConfig& config, SweepParam param,
                                         const std::vector<double>& grid, const EvalOptions& base) {
  if (grid.empty()) throw std::invalid_argument("robustness sweep over an empty grid");
  std::vector<SweepPoint> out;
  for (double v : grid) {
    if (!(v > 0)) throw std::invalid_argument("robustness sweep values must be positive");
    EvalOptions o = base;
    o.dr = false;
    EnvParams p;
    (param == SweepParam::Scale ? p.object_scale : p.object_mass) = v;
    o.fixed_params = p;
    o.label = to_string(param) + "=" + nlohmann::json(v).dump();
    out.push_back({v, evaluate(policy, config, o)});
  }
  return out;
}

ObjectSpec object_from_name(const std::string& name, const ObjectSpec& training) {
  static const std::regex cube(R"(cube_([0-9]+(?:\.[0-9]+)?)cm)");
  static const std::regex ball(R"(ball_r([0-9]+(?:\.[0-9]+)?)cm)");
  static const std::regex cuboid(R"(cuboid_([0-9]+(?:\.[0-9]+)?)x([0-9]+(?:\.[0-9]+)?)x([0-9]+(?:\.[0-9]+)?)cm)");
  const double training_volume = training.shape == ObjectShape::Sphere
                                     ? 4.0 / 3.0 * std::numbers::pi * std::pow(training.radius, 3)
                                     : 8.0 * training.half_extents.x * training.half_extents.y * training.half_extents.z;
  const double density = training.mass / training_volume;
  ObjectSpec o = training;
  std::smatch m;
  auto cm = [&](int i) { return std::stod(m[i].str()) / 100.0; };
  if (std::regex_match(name, m, cube)) {
    o.shape = ObjectShape::Cuboid;
    o.half_extents = {cm(1) / 2, cm(1) / 2, cm(1) / 2};
  } else if (std::regex_match(name, m, cuboid)) {
    o.shape = ObjectShape::Cuboid;
    o.half_extents = {cm(1) / 2, cm(2) / 2, cm(3) / 2};
  } else if (std::regex_match(name, m, ball)) {
    o.shape = ObjectShape::Sphere;
    o.radius = cm(1);
  } else {
    throw UnsupportedObject("unsupported object '" + name +
                            "': only primitives cube_<s>cm, ball_r<r>cm and cuboid_<x>x<y>x<z>cm are simulated");
  }
  const double volume = o.shape == ObjectShape::Sphere ? 4.0 / 3.0 * std::numbers::pi * std::pow(o.radius, 3)
                                                       : 8.0 * o.half_extents.x * o.half_extents.y * o.half_extents.z;
  o.mass = density * volume;
  o.validate();
  return o;
}

std::vector<EvalReport> zero_shot_objects(const Policy& policy, const EngineConfig& config,
                                          const std::vector<std::string>& objects, const EvalOptions& base) {
  if (objects.empty()) throw std::invalid_argument("zero-shot evaluation needs at least one object");
  std::vector<ObjectSpec> specs;
  for (const auto& name : objects) specs.push_back(object_from_name(name, config.physics.object));
  std::vector<EvalReport> out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    EvalOptions o = base;
    o.dr = false;
    o.object = specs[i];
    o.label = objects[i];
    out.push_back(evaluate(policy, config, o));
  }
  return out;
}

std::string Variant::name() const {
  return std::string("O-") + (observation == PoseRepr::Keypoints ? "KP" : "PQ") + "+R-" +
         (reward == PoseRepr::Keypoints ? "KP" : "PQ");
}

std::vector<Variant> ablation_variants() {
  return {{PoseRepr::Keypoints, PoseRepr::Keypoints},
          {PoseRepr::Keypoints, PoseRepr::PosQuat},
          {PoseRepr::PosQuat, PoseRepr::Keypoints},
          {PoseRepr::PosQuat, PoseRepr::PosQuat}};
}

std::vector<AblationArm> run_ablation(const EngineConfig& config, const std::vector<Variant>& variants,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const AblationArm&)>& on_arm) {
  if (variants.empty() || seeds.empty()) throw std::invalid_argument("ablation needs variants and seeds");
  std::vector<AblationArm> arms;
  for (const Variant& v : variants) {
    for (std::uint64_t seed : seeds) {
      EngineConfig c = config;
      c.task.observation = v.observation;
      c.task.reward = v.reward;
      c.run.seed = seed;
      if (!c.harness.ablation_dr) c.dr = DRConfig::disabled();
      AblationArm arm;
      arm.variant = v;
      arm.seed = seed;
      EvalOptions eo = eval_options(c);
      eo.label = v.name() + "/seed" + std::to_string(seed);
      try {
        Trainer t(c);
        const std::uint64_t batch = static_cast<std::uint64_t>(c.ppo.batch_size);
        const std::uint64_t iters = (c.run.total_steps + batch - 1) / batch;
        // Evaluation points spread evenly over the iterations, always including the last.
        std::vector<std::uint64_t> marks;
        for (int k = 1; k <= c.harness.curve_points; ++k)
          marks.push_back(iters * static_cast<std::uint64_t>(k) / static_cast<std::uint64_t>(c.harness.curve_points));
        double wall = 0.0;
        auto record = [&] {
          const EvalReport r = evaluate(t.policy(), c, eo);
          arm.curve.push_back({t.global_step(), wall, r.success_rate, r.position_rate, r.orientation_rate});
          arm.final_report = r;
        };
        if (iters == 0) record();
        for (std::uint64_t it = 1; it <= iters; ++it) {
          const auto t0 = std::chrono::steady_clock::now();
          const IterationStats s = t.iterate();
          wall += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          arm.fingertip_term.emplace_back(s.global_step, s.reward_fingertip_to_object);
          if (std::find(marks.begin(), marks.end(), it) != marks.end()) record();
        }
      } catch (const NonFiniteError& e) {
        arm.diverged = true;
        arm.error = e.what();
      }
      if (on_arm) on_arm(arm);
      arms.push_back(std::move(arm));
    }
  }
  return arms;
}

}  // namespace reposer
