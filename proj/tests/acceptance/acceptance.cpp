// Acceptance suite: one PASS/FAIL line per criterion. The desk-scale trend
// reproduction trains for hours and only runs with REPOSER_EXTENDED=1 (or --extended).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "../test_util.hpp"
#include "reposer/harness.hpp"
#include "reposer/ppo.hpp"
#include "reposer/reach.hpp"

using namespace reposer;
using reposer::testing::random_pose;

namespace {

struct Outcome {
  enum Kind { Pass, Fail, Skip, Report } kind = Fail;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ 1

Outcome kernel_values() {
  const double k0 = logistic_kernel(0.0, {30.0, 2.0});
  const TaskConfig task;
  const KeypointSet local = cube_local_keypoints(task.keypoint_half_extent);
  const Goal goal = make_goal({{0.03, -0.04, 0.09}, Quaternion::from_axis_angle({1, -2, 0.5}, 2.3)}, local);
  const double r = object_goal_reward(goal.pose, goal, task, local);
  return pass_if(std::abs(k0 - 0.25) <= 1e-12 && std::abs(r - 2.0) <= 1e-12,
                 fmt("K(0)=%.17g  object_goal_reward(at goal)=%.17g", k0, r));
}

// ------------------------------------------------------------------ 2

Outcome observation_contract() {
  const ObservationLayout L = ObservationLayout::make(PoseRepr::Keypoints);
  // Golden offsets: actor blocks then the privileged critic blocks.
  const std::vector<std::pair<int, int>> golden{{L.joint_pos, 0},        {L.joint_vel, 9},
                                                {L.object_pose, 18},     {L.goal_pose, 42},
                                                {L.last_action, 66},     {L.actor_dim, 75},
                                                {L.object_vel, 75},      {L.fingertip_pose, 81},
                                                {L.fingertip_vel, 102},  {L.fingertip_wrench, 120},
                                                {L.joint_torque, 138},   {L.critic_dim, 147}};
  bool ok = std::all_of(golden.begin(), golden.end(), [](auto p) { return p.first == p.second; });
  EnvConfig c;
  BatchedEnv env(c, 3, 1);
  ok = ok && env.actor_dim() == 75 && env.critic_dim() == 147 && env.actor_obs().size() == 3u * 75 &&
       env.critic_obs().size() == 3u * 147;
  return pass_if(ok, fmt("actor %d, critic %d, block offsets match the golden layout", env.actor_dim(),
                         env.critic_dim()));
}

// ------------------------------------------------------------------ 3

double quat_gap(const Quaternion& a, const Quaternion& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z) +
                   (a.w - b.w) * (a.w - b.w));
}

Outcome double_cover() {
  TaskConfig task;
  const KeypointSet local = cube_local_keypoints(task.keypoint_half_extent);
  std::mt19937_64 gen(2024);
  int mismatches = 0;
  for (int n = 0; n < 10000; ++n) {
    const Pose p = random_pose(gen);
    const Pose q{p.translation, -p.rotation};
    const Goal goal = make_goal(random_pose(gen), local);
    if (keypoints_to_flat(pose_to_keypoints(p, local)) != keypoints_to_flat(pose_to_keypoints(q, local))) ++mismatches;
    if (object_goal_reward(p, goal, task, local) != object_goal_reward(q, goal, task, local)) ++mismatches;
  }

  // End to end: a camera that flips the quaternion sign at random leaves the
  // keypoint observations and rewards of the env untouched.
  EnvConfig a, b;
  a.task.camera_period = b.task.camera_period = 1;
  b.task.camera_sign_flip_prob = 0.5;
  BatchedEnv ea(a, 8, 3), eb(b, 8, 3);
  std::mt19937_64 act(5);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  bool env_same = ea.actor_obs() == eb.actor_obs();
  for (int t = 0; t < 60; ++t) {
    std::vector<float> actions(8 * kNumJoints);
    for (float& v : actions) v = u(act);
    ea.step(actions, 0);
    eb.step(actions, 0);
    env_same = env_same && ea.actor_obs() == eb.actor_obs() && ea.rewards() == eb.rewards();
  }

  // Pos-quat path: raw flipped camera output jumps across the double cover;
  // the sign filter keeps consecutive observations close.
  TaskConfig pq = task, raw = task;
  pq.observation = PoseRepr::PosQuat;
  pq.camera_period = raw.camera_period = 1;
  pq.camera_sign_flip_prob = raw.camera_sign_flip_prob = 0.5;
  const DRConfig dr;
  const EnvParams params;
  CameraState cf, cr;
  Quaternion lf, lr;
  double max_filtered = 0.0, max_raw = 0.0;
  for (std::uint64_t frame = 0; frame < 2000; ++frame) {
    const Pose truth{{0, 0, 0.05}, Quaternion::from_axis_angle({0.3, -0.2, 1.0}, 0.01 * static_cast<double>(frame))};
    CounterRng n1(4, 0, frame, Stream::ObsNoise), c1(4, 0, frame, Stream::Camera);
    CounterRng n2(4, 0, frame, Stream::ObsNoise), c2(4, 0, frame, Stream::Camera);
    const Quaternion f = camera_delay_observe(truth, frame, cf, pq, dr, params, n1, c1).rotation;
    const Quaternion r = camera_delay_observe(truth, frame, cr, raw, dr, params, n2, c2).rotation;
    if (frame > 0) {
      max_filtered = std::max(max_filtered, quat_gap(f, lf));
      max_raw = std::max(max_raw, quat_gap(r, lr));
    }
    lf = f;
    lr = r;
  }
  return pass_if(mismatches == 0 && env_same && max_filtered < 0.2 && max_raw > 1.0,
                 fmt("10^4 poses: %d mismatches; env obs/reward identical under flips: %s; pos-quat consecutive "
                     "gap %.3f filtered vs %.3f unfiltered",
                     mismatches, env_same ? "yes" : "no", max_filtered, max_raw));
}

// ------------------------------------------------------------------ 4

// A_t = sum_l (gamma tau)^l delta_{t+l}, truncated at the first done.
std::vector<double> brute_force_gae(const std::vector<double>& r, const std::vector<double>& v,
                                    const std::vector<std::uint8_t>& d, double boot, double gamma, double tau) {
  const int T = static_cast<int>(r.size());
  std::vector<double> adv(T, 0.0);
  for (int t = 0; t < T; ++t) {
    double sum = 0.0, weight = 1.0;
    for (int l = t; l < T; ++l) {
      const double next = l + 1 < T ? v[l + 1] : boot;
      sum += weight * (r[l] + (d[l] ? 0.0 : gamma * next) - v[l]);
      if (d[l]) break;
      weight *= gamma * tau;
    }
    adv[t] = sum;
  }
  return adv;
}

Outcome gae_oracle() {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> len(1, 64);
  std::uniform_real_distribution<double> p(0.0, 0.3);
  double max_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = len(gen);
    const double gamma = trial % 2 ? 0.99 : 0.95, tau = trial % 3 ? 0.95 : 1.0;
    std::bernoulli_distribution done(p(gen));
    std::vector<double> r(T), v(T), boot{u(gen)};
    std::vector<std::uint8_t> d(T);
    for (int t = 0; t < T; ++t) r[t] = u(gen), v[t] = u(gen), d[t] = done(gen);
    const GaeResult g = gae(r, v, d, boot, 1, gamma, tau);
    const auto oracle = brute_force_gae(r, v, d, boot[0], gamma, tau);
    for (int t = 0; t < T; ++t) max_err = std::max(max_err, std::abs(g.advantages[t] - oracle[t]));
  }
  return pass_if(max_err < 1e-8, fmt("1000 trajectories, max |error| %.3g", max_err));
}

// ------------------------------------------------------------------ 5

Mlp<double> tiny_net(std::vector<int> sizes, std::uint64_t seed) {
  Mlp<double> net(std::move(sizes));
  net.init_orthogonal(seed, 1.0, 0.7);
  CounterRng rng(seed, 99, 0, Stream::Init);
  for (int l = 0; l < net.num_layers(); ++l)
    for (int i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = 0.3 * rng.normal();
  return net;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6); }

Outcome gradient_check() {
  const Mlp<double> actor = tiny_net({3, 5, 4, 2}, 11);
  const Mlp<double> critic = tiny_net({4, 5, 1}, 12);
  const int M = 10;
  std::mt19937_64 gen(13);
  std::normal_distribution<double> n01;
  Mlp<double>::Mat obs(3, M), cobs(4, M), actions(2, M);
  for (int j = 0; j < M; ++j) {
    for (int i = 0; i < 3; ++i) obs(i, j) = n01(gen);
    for (int i = 0; i < 4; ++i) cobs(i, j) = n01(gen);
  }
  const std::vector<double> log_std{-0.2, 0.1};
  const Mlp<double>::Mat mu = actor.forward(obs);
  std::vector<double> old_lp(M), adv(M), ret(M);
  const double shifts[] = {0.0, 0.12, -0.12, 0.6, -0.6};
  for (int j = 0; j < M; ++j) {
    for (int k = 0; k < 2; ++k) actions(k, j) = mu(k, j) + std::exp(log_std[k]) * n01(gen);
    const double a[2] = {actions(0, j), actions(1, j)}, m[2] = {mu(0, j), mu(1, j)};
    old_lp[j] = gaussian_log_prob(a, m, log_std) + shifts[j % 5];
    adv[j] = n01(gen);
    ret[j] = n01(gen);
  }
  auto ploss = [&](const Mlp<double>& net, const std::vector<double>& ls) {
    std::vector<double> ga(net.num_params()), gl(2);
    return policy_loss<double>(net, ls, obs, actions, old_lp, adv, 0.2, 0.01, ga, gl).loss;
  };
  std::vector<double> ga(actor.num_params(), 0.0), gl(2, 0.0);
  policy_loss<double>(actor, log_std, obs, actions, old_lp, adv, 0.2, 0.01, ga, gl);
  const double h = 1e-6;
  double worst_p = 0.0, worst_v = 0.0;
  for (std::size_t p = 0; p < actor.num_params(); ++p) {
    Mlp<double> plus = actor, minus = actor;
    plus.params()[p] += h;
    minus.params()[p] -= h;
    worst_p = std::max(worst_p, rel_err((ploss(plus, log_std) - ploss(minus, log_std)) / (2 * h), ga[p]));
  }
  for (int k = 0; k < 2; ++k) {
    auto lp = log_std, lm = log_std;
    lp[k] += h;
    lm[k] -= h;
    worst_p = std::max(worst_p, rel_err((ploss(actor, lp) - ploss(actor, lm)) / (2 * h), gl[k]));
  }
  std::vector<double> gc(critic.num_params(), 0.0), scratch(critic.num_params());
  value_loss<double>(critic, cobs, ret, gc);
  for (std::size_t p = 0; p < critic.num_params(); ++p) {
    Mlp<double> plus = critic, minus = critic;
    plus.params()[p] += h;
    minus.params()[p] -= h;
    const double fd =
        (value_loss<double>(plus, cobs, ret, scratch) - value_loss<double>(minus, cobs, ret, scratch)) / (2 * h);
    worst_v = std::max(worst_v, rel_err(fd, gc[p]));
  }
  return pass_if(worst_p < 1e-4 && worst_v < 1e-4,
                 fmt("max relative error: clipped surrogate %.2e, value loss %.2e", worst_p, worst_v));
}

// ------------------------------------------------------------------ 6

double stddev(const std::vector<double>& xs) {
  double s = 0.0, s2 = 0.0;
  for (double x : xs) s += x;
  const double m = s / static_cast<double>(xs.size());
  for (double x : xs) s2 += (x - m) * (x - m);
  return std::sqrt(s2 / static_cast<double>(xs.size() - 1));
}

Outcome dr_statistics() {
  const DRConfig cfg;
  constexpr int kDraws = 100000;
  std::vector<std::string> failures;
  std::string summary;
  auto within = [&](const std::string& name, double got, double want) {
    const bool ok = std::abs(got - want) <= 0.05 * std::abs(want);
    if (!ok) failures.push_back(fmt("%s %.5g vs %.5g", name.c_str(), got, want));
  };

  struct RangeStat {
    const char* name;
    UniformRange range;
    std::vector<double> xs;
  };
  std::vector<RangeStat> ranges{{"object_scale", cfg.object_scale, {}},
                                {"object_mass", cfg.object_mass, {}},
                                {"object_friction", cfg.object_friction, {}},
                                {"table_friction", cfg.table_friction, {}}};
  std::vector<double> jp_corr, jv_corr, tq_corr;
  for (int i = 0; i < kDraws; ++i) {
    CounterRng rng(31, static_cast<std::uint64_t>(i), 0, Stream::Episode);
    const EnvParams p = sample_episode_randomization(rng, cfg);
    ranges[0].xs.push_back(p.object_scale);
    ranges[1].xs.push_back(p.object_mass);
    ranges[2].xs.push_back(p.object_friction);
    ranges[3].xs.push_back(p.table_friction);
    jp_corr.push_back(p.joint_pos_offset[i % kNumJoints]);
    jv_corr.push_back(p.joint_vel_offset[i % kNumJoints]);
    tq_corr.push_back(p.torque_offset[i % kNumJoints]);
  }
  for (auto& r : ranges) {
    const auto [lo, hi] = std::minmax_element(r.xs.begin(), r.xs.end());
    const double width = r.range.hi - r.range.lo;
    // Sample extremes must lie inside the range and reach within 5% of its width.
    if (*lo < r.range.lo || *hi > r.range.hi || *lo > r.range.lo + 0.05 * width || *hi < r.range.hi - 0.05 * width)
      failures.push_back(fmt("%s observed [%.4f, %.4f]", r.name, *lo, *hi));
    within(std::string(r.name) + " std", stddev(r.xs), width / std::sqrt(12.0));
  }
  within("joint_position sigma_corr", stddev(jp_corr), cfg.joint_position.sigma_corr);
  within("joint_velocity sigma_corr", stddev(jv_corr), cfg.joint_velocity.sigma_corr);
  within("torque sigma_corr", stddev(tq_corr), cfg.torque.sigma_corr);

  std::vector<double> jp, jv, tq, cx, angle;
  const EnvParams nominal;
  const Pose truth{{0.02, -0.01, 0.05}, Quaternion::from_axis_angle({1, 1, 0}, 0.7)};
  for (int i = 0; i < kDraws; ++i) {
    const auto k = static_cast<std::uint64_t>(i);
    CounterRng a(32, 0, k, Stream::JointNoise), b(33, 0, k, Stream::JointNoise), c(34, 0, k, Stream::ActNoise),
        d(35, 0, k, Stream::ObsNoise);
    jp.push_back(apply_observation_noise(0.1, cfg.joint_position, 0.0, a) - 0.1);
    jv.push_back(apply_observation_noise(0.5, cfg.joint_velocity, 0.0, b) - 0.5);
    std::array<double, kNumJoints> t{};
    const std::array<double, kNumJoints> zero{};
    apply_action_noise(t, cfg.torque, zero, c);
    tq.push_back(t[i % kNumJoints]);
    const Pose seen = apply_pose_noise(truth, cfg, nominal, d);
    cx.push_back(seen.translation.x - truth.translation.x);
    angle.push_back(rot_dist(seen.rotation, truth.rotation));
  }
  within("joint_position sigma", stddev(jp), cfg.joint_position.sigma);
  within("joint_velocity sigma", stddev(jv), cfg.joint_velocity.sigma);
  within("torque sigma", stddev(tq), cfg.torque.sigma);
  within("cube_position sigma", stddev(cx), cfg.cube_position.sigma);
  // Rotation angle ~ |N(0, sigma^2)|, whose RMS is sigma.
  double ms = 0.0;
  for (double x : angle) ms += x * x;
  within("cube_orientation sigma", std::sqrt(ms / kDraws), cfg.cube_orientation.sigma);

  // Clamp ranges hold at the bounds.
  CounterRng clamp_rng(36, 0, 0, Stream::ActNoise);
  std::array<double, kNumJoints> t;
  t.fill(0.36);
  const std::array<double, kNumJoints> big{1, 1, 1, 1, 1, 1, 1, 1, 1};
  apply_action_noise(t, cfg.torque, big, clamp_rng);
  if (t[0] != cfg.torque.hi) failures.push_back("torque clamp");
  CounterRng jr(37, 0, 0, Stream::JointNoise);
  if (apply_observation_noise(1.57, cfg.joint_position, 1.0, jr) != cfg.joint_position.hi)
    failures.push_back("joint position clamp");

  // External forces: fresh force with the configured probability.
  int fresh = 0;
  for (int i = 0; i < kDraws; ++i) {
    SimState s(1);
    CounterRng rng(38, 0, static_cast<std::uint64_t>(i), Stream::ExternalForce);
    apply_external_force(s, 0, rng, cfg.external_force, 0.094, 9.81);
    fresh += s.external_force[0] != 0.0 || s.external_force[1] != 0.0 || s.external_force[2] != 0.0;
  }
  within("external force probability", static_cast<double>(fresh) / kDraws, cfg.external_force.probability);

  summary = fmt("10^5 draws: 4 ranges, 3 sigma_corr, 5 sigma, 2 clamps, force probability; %zu outside 5%%",
                failures.size());
  for (const auto& f : failures) summary += "; " + f;
  return pass_if(failures.empty(), summary);
}

// ------------------------------------------------------------------ 7

Outcome physics_sanity() {
  const Physics physics(PhysicsConfig{});
  const std::vector<double> zero(kNumJoints, 0.0);
  const std::vector<EnvParams> params(1);
  const double g = physics.config().gravity, dt = physics.config().dt;

  SimState drop(1);
  const double he = physics.config().object.half_extents.z, z0 = he + 0.12;
  drop.set_object_pose(0, {{0, 0, z0}, {}});
  double worst_drop = 0.0;
  for (int k = 1; k < 100; ++k) {
    physics.step(drop, zero, params);
    const double t = k * dt, fall = 0.5 * g * t * t;
    if (z0 - fall - he <= 0.0) break;
    worst_drop = std::max(worst_drop, std::abs((z0 - drop.object_pose(0).translation.z) - fall) / fall);
  }

  SimState rest(1);
  const BodyProps props = body_props(physics.config().object, EnvParams{}, physics.config().contact);
  rest.set_object_pose(0, {{0, 0, physics.resting_height(props)}, {}});
  const Vec3 start = rest.object_pose(0).translation;
  double drift = 0.0;
  for (int k = 0; k < 50; ++k) {
    physics.step(rest, zero, params);
    drift = std::max(drift, norm(rest.object_pose(0).translation - start));
  }

  // 1-DoF: I qdd = tau - c qd gives qd(t) = tau/c (1 - exp(-c t / I)).
  SimState joint(1);
  joint.set_object_pose(0, {{0, 0, physics.resting_height(props)}, {}});
  std::vector<double> torques(kNumJoints, 0.0);
  torques[0] = 0.08;
  const double I = physics.hand().joint_inertia[0], c = physics.hand().joint_damping[0];
  double worst_joint = 0.0;
  for (int k = 1; k <= 15; ++k) {
    physics.step(joint, torques, params);
    const double want = torques[0] / c * (1.0 - std::exp(-c * k * dt / I));
    worst_joint = std::max(worst_joint, std::abs(joint.joint_vel[0] - want) / want);
  }
  return pass_if(worst_drop <= 0.05 && drift < 1e-4 && worst_joint <= 0.01,
                 fmt("drop error %.2e (rel), resting drift %.2e m, joint response error %.2e (rel)", worst_drop, drift,
                     worst_joint));
}

// ------------------------------------------------------------------ 8

double reach_return(const EngineConfig& c, const Policy* p) {
  ReachEnv env(c.reach, 1024, 4242);
  double ret = 0.0;
  int episodes = 0;
  for (int t = 0; t < c.reach.episode_length; ++t) {
    env.step(p ? p->actions(env.actor_obs(), env.num_envs()) : env.oracle_actions(), 0);
    for (const auto& e : env.finished()) ret += e.episode_return, ++episodes;
  }
  return ret / episodes;
}

Outcome learning_smoke() {
  const EngineConfig c = make_profile("reach");
  const double oracle = reach_return(c, nullptr);
  auto train = [&](double& secs) {
    const auto t0 = std::chrono::steady_clock::now();
    Trainer t(c);
    std::string log;
    while (!t.finished()) log += to_json(t.iterate(), false).dump();
    secs = seconds_since(t0);
    return std::make_pair(t.policy(), log);
  };
  double s1 = 0.0, s2 = 0.0;
  const auto [p1, log1] = train(s1);
  const double learned = reach_return(c, &p1);
  const auto [p2, log2] = train(s2);
  const bool deterministic = log1 == log2 && reach_return(c, &p2) == learned;
  const double ratio = learned / oracle;
  return pass_if(ratio >= 0.9 && s1 <= 300.0 && deterministic,
                 fmt("return %.3f vs oracle %.3f (%.1f%%) after %.1f s; same-seed rerun identical: %s", learned,
                     oracle, 100 * ratio, s1, deterministic ? "yes" : "no"));
}

// ------------------------------------------------------------------ 9

Outcome trend_reproduction(bool enabled) {
  if (!enabled)
    return {Outcome::Skip, "extended suite (hours of training); run with REPOSER_EXTENDED=1 or --extended"};
  const EngineConfig c = make_profile("desk");
  const auto t0 = std::chrono::steady_clock::now();
  const auto arms = run_ablation(c, ablation_variants(), c.harness.seeds, [&](const AblationArm& a) {
    std::printf("    arm %s seed %llu: orientation %.3f success %.3f%s (%.0f s elapsed)\n", a.variant.name().c_str(),
                static_cast<unsigned long long>(a.seed), a.final_report.orientation_rate,
                a.final_report.success_rate, a.diverged ? " diverged" : "", seconds_since(t0));
    std::fflush(stdout);
  });
  // (a) paired by seed and observation type, keypoint reward vs pos-quat reward.
  int wins = 0, pairs = 0;
  double kp = 0.0, pq = 0.0;
  for (const auto& a : arms) {
    if (a.variant.reward != PoseRepr::Keypoints) continue;
    for (const auto& b : arms) {
      if (b.variant.reward != PoseRepr::PosQuat || b.variant.observation != a.variant.observation || b.seed != a.seed)
        continue;
      ++pairs;
      wins += a.final_report.orientation_rate > b.final_report.orientation_rate;
      kp += a.final_report.orientation_rate;
      pq += b.final_report.orientation_rate;
    }
  }
  // (b) the approach term is logged as exactly zero past the cutoff.
  int late_nonzero = 0, late = 0;
  const auto batch = static_cast<std::uint64_t>(c.ppo.batch_size);
  for (const auto& a : arms)
    for (const auto& [step, term] : a.fingertip_term)
      if (step - batch > c.task.curriculum_cutoff) ++late, late_nonzero += term != 0.0;
  const bool trend = pairs > 0 && kp > pq && wins * 2 > pairs;
  return pass_if(trend && late > 0 && late_nonzero == 0,
                 fmt("(a) mean orientation success R-KP %.3f vs R-PQ %.3f, %d/%d paired wins; (b) %d/%d post-cutoff "
                     "iterations with non-zero fingertip term",
                     pairs ? kp / pairs : 0.0, pairs ? pq / pairs : 0.0, wins, pairs, late_nonzero, late));
}

// ------------------------------------------------------------------ 10

Outcome harness_invariants() {
  EngineConfig c = make_profile("smoke");
  c.harness.eval_episodes = 128;
  c.harness.eval_envs = 64;
  Trainer t(c);
  t.iterate();
  const Policy& p = t.policy();
  const EvalOptions o = eval_options(c);
  const EvalReport r = evaluate(p, c, o);

  const Heatmap h = threshold_heatmap(r.trials, {0.05, 0.01, 0.03, 0.02, 0.1, 0.2},
                                      {5.73, 90.0, 11.0, 22.0, 180.0, 45.0});
  bool monotone = true;
  for (std::size_t i = 0; i < h.success.size(); ++i)
    for (std::size_t j = 0; j < h.success[i].size(); ++j) {
      if (i > 0 && h.success[i][j] < h.success[i - 1][j]) monotone = false;
      if (j > 0 && h.success[i][j] < h.success[i][j - 1]) monotone = false;
    }

  // Loose thresholds so an early policy gives non-trivial rates on each axis.
  const SuccessBreakdown b = success_breakdown(r.trials, {0.06, std::numbers::pi / 2});
  const bool breakdown_ok = b.combined <= std::min(b.position, b.orientation);

  EvalOptions small = o;
  small.episodes = 32;
  auto sweep = [&] { return robustness_sweep(p, c, SweepParam::Mass, {0.5, 1.0, 3.0}, small); };
  auto objects = [&] { return zero_shot_objects(p, c, {"cube_6.5cm", "ball_r3.75cm", "cuboid_2x8x2cm"}, small); };
  auto dump_sweep = [](const std::vector<SweepPoint>& s) {
    std::string out;
    for (const auto& x : s) {
      out += summary_json(x.report).dump();
      for (const Trial& tr : x.report.trials) out += fmt("|%.17g %.17g %.17g", tr.pos_err, tr.rot_err, tr.episode_return);
    }
    return out;
  };
  auto dump_objects = [](const std::vector<EvalReport>& s) {
    std::string out;
    for (const auto& x : s) {
      out += summary_json(x).dump();
      for (const Trial& tr : x.trials) out += fmt("|%.17g %.17g %.17g", tr.pos_err, tr.rot_err, tr.episode_return);
    }
    return out;
  };
  const bool sweep_repro = dump_sweep(sweep()) == dump_sweep(sweep());
  const bool objects_repro = dump_objects(objects()) == dump_objects(objects());
  return pass_if(monotone && breakdown_ok && sweep_repro && objects_repro,
                 fmt("heatmap monotone: %s; combined %.3f <= min(position %.3f, orientation %.3f): %s; sweep "
                     "bit-reproducible: %s; zero-shot bit-reproducible: %s",
                     monotone ? "yes" : "no", b.combined, b.position, b.orientation, breakdown_ok ? "yes" : "no",
                     sweep_repro ? "yes" : "no", objects_repro ? "yes" : "no"));
}

// ------------------------------------------------------------------ 11

Outcome throughput() {
  EngineConfig c = make_profile("desk");
  const int n = 4096, steps = 20;
  auto env = make_env(c, n, 0);
  std::vector<float> actions(static_cast<std::size_t>(n) * kNumJoints);
  for (std::size_t k = 0; k < actions.size(); ++k) actions[k] = static_cast<float>(std::sin(0.37 * k));
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < steps; ++t) env->step(actions, 0);
  const double rate = n * steps / seconds_since(t0);
  return {Outcome::Report, fmt("%.0f env-steps/sec at N=4096 on 1 thread (reference: >50K samples/sec on one GPU "
                               "for the original system)",
                               rate)};
}

}  // namespace

int main(int argc, char** argv) {
  bool extended = false;
  if (const char* e = std::getenv("REPOSER_EXTENDED"); e && std::strcmp(e, "1") == 0) extended = true;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--extended") == 0)
      extended = true;
    else
      only.push_back(std::atoi(argv[i]));
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"kernel values", kernel_values},
      {"observation contract", observation_contract},
      {"double-cover invariance", double_cover},
      {"GAE oracle equivalence", gae_oracle},
      {"gradient check", gradient_check},
      {"DR statistics", dr_statistics},
      {"physics sanity", physics_sanity},
      {"learning smoke test (reach)", learning_smoke},
      {"desk-scale trend reproduction", [&] { return trend_reproduction(extended); }},
      {"harness invariants", harness_invariants},
      {"throughput benchmark", throughput},
  };

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    static const char* const tags[] = {"PASS", "FAIL", "SKIP", "INFO"};
    std::printf("[%s] %2d %s (%.1f s): %s\n", tags[o.kind], id, criteria[k].first, seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.kind == Outcome::Fail;
  }
  return failed == 0 ? 0 : 1;
}
