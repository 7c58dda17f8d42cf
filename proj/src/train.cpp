#include "reposer/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "reposer/reach.hpp"

namespace reposer {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void save_mlp(Checkpoint& ck, const std::string& prefix, const Mlp<float>& net) {
  for (int l = 0; l < net.num_layers(); ++l) {
    const int out = net.sizes()[l + 1], in = net.sizes()[l];
    const auto p = net.params();
    std::vector<float> w(p.begin() + static_cast<std::ptrdiff_t>(net.weight_offset(l)),
                         p.begin() + static_cast<std::ptrdiff_t>(net.weight_offset(l) + static_cast<std::size_t>(out) * in));
    std::vector<float> b(p.begin() + static_cast<std::ptrdiff_t>(net.bias_offset(l)),
                         p.begin() + static_cast<std::ptrdiff_t>(net.bias_offset(l) + out));
    ck.add(prefix + ".l" + std::to_string(l) + ".weight", {out, in}, std::move(w));
    ck.add(prefix + ".l" + std::to_string(l) + ".bias", {out}, std::move(b));
  }
}

Mlp<float> load_mlp(const Checkpoint& ck, const std::string& prefix, const std::vector<int>& sizes) {
  Mlp<float> net(sizes);
  auto p = net.params();
  for (int l = 0; l < net.num_layers(); ++l) {
    const Tensor& w = ck.tensor(prefix + ".l" + std::to_string(l) + ".weight");
    const Tensor& b = ck.tensor(prefix + ".l" + std::to_string(l) + ".bias");
    const std::vector<std::int64_t> ws{sizes[l + 1], sizes[l]}, bs{sizes[l + 1]};
    if (w.is_f64 || b.is_f64 || w.shape != ws || b.shape != bs)
      throw IncompatibleCheckpoint("checkpoint tensor " + prefix + ".l" + std::to_string(l) +
                                   " does not match its declared layer sizes");
    std::copy(w.f32.begin(), w.f32.end(), p.begin() + static_cast<std::ptrdiff_t>(net.weight_offset(l)));
    std::copy(b.f32.begin(), b.f32.end(), p.begin() + static_cast<std::ptrdiff_t>(net.bias_offset(l)));
  }
  return net;
}

void save_rms(Checkpoint& ck, const std::string& prefix, const RunningMeanStd& r) {
  ck.add(prefix + ".mean", {r.dim()}, r.mean);
  ck.add(prefix + ".var", {r.dim()}, r.var);
  ck.add(prefix + ".count", {1}, std::vector<double>{r.count});
}

RunningMeanStd load_rms(const Checkpoint& ck, const std::string& prefix) {
  RunningMeanStd r;
  r.mean = ck.tensor(prefix + ".mean").f64;
  r.var = ck.tensor(prefix + ".var").f64;
  const auto& c = ck.tensor(prefix + ".count").f64;
  if (r.mean.size() != r.var.size() || c.size() != 1) throw CheckpointError("malformed normalizer " + prefix);
  r.count = c[0];
  return r;
}

void save_adam(Checkpoint& ck, const std::string& prefix, const AdamState& a) {
  ck.add(prefix + ".m", {static_cast<std::int64_t>(a.m.size())}, a.m);
  ck.add(prefix + ".v", {static_cast<std::int64_t>(a.v.size())}, a.v);
  ck.manifest["optimizer"][prefix] = {{"step", a.step}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

AdamState load_adam(const Checkpoint& ck, const std::string& prefix, std::size_t n) {
  AdamState a;
  a.m = ck.tensor(prefix + ".m").f32;
  a.v = ck.tensor(prefix + ".v").f32;
  if (a.m.size() != n || a.v.size() != n) throw CheckpointError("optimizer state " + prefix + " has the wrong size");
  const auto& meta = ck.manifest.at("optimizer").at(prefix);
  a.step = meta.at("step").get<std::uint64_t>();
  a.beta1 = meta.at("beta1").get<double>();
  a.beta2 = meta.at("beta2").get<double>();
  a.eps = meta.at("eps").get<double>();
  return a;
}

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

}  // namespace

std::unique_ptr<VecEnv> make_env(const EngineConfig& config, int num_envs, std::uint64_t seed, int workers) {
  if (config.run.task == "reach") return std::make_unique<ReachEnv>(config.reach, num_envs, seed);
  return std::make_unique<BatchedEnv>(config.env(), num_envs, seed, workers);
}

std::vector<float> Policy::actions(std::span<const float> actor_obs, int n, bool stochastic, std::uint64_t seed,
                                   std::uint64_t draw_index) const {
  std::vector<float> obs(actor_obs.begin(), actor_obs.end());
  if (normalize) actor_norm.normalize(obs);
  ActResult r = act(net, obs, n, stochastic, seed, draw_index);
  for (float& a : r.actions) a = std::clamp(a, -1.0f, 1.0f);
  return std::move(r.actions);
}

void Policy::save(Checkpoint& ck) const {
  ck.manifest["policy"] = {{"actor_sizes", net.actor.sizes()},
                           {"critic_sizes", net.critic.sizes()},
                           {"activation", "elu"},
                           {"weight_layout", "row-major [out, in]"},
                           {"normalize_obs", normalize},
                           {"obs_clip", actor_norm.clip},
                           {"obs_epsilon", actor_norm.epsilon}};
  save_mlp(ck, "actor", net.actor);
  ck.add("actor.log_std", {static_cast<std::int64_t>(net.log_std.size())}, net.log_std);
  save_mlp(ck, "critic", net.critic);
  save_rms(ck, "actor_norm", actor_norm);
  save_rms(ck, "critic_norm", critic_norm);
}

Policy Policy::load(const Checkpoint& ck) {
  if (!ck.manifest.contains("policy")) throw CheckpointError("checkpoint holds no policy");
  const auto& meta = ck.manifest.at("policy");
  Policy p;
  const auto as = meta.at("actor_sizes").get<std::vector<int>>();
  const auto cs = meta.at("critic_sizes").get<std::vector<int>>();
  if (as.size() < 2 || cs.size() < 2 || cs.back() != 1) throw IncompatibleCheckpoint("checkpoint has malformed layer sizes");
  p.net.actor = load_mlp(ck, "actor", as);
  p.net.critic = load_mlp(ck, "critic", cs);
  const Tensor& ls = ck.tensor("actor.log_std");
  if (ls.is_f64 || ls.numel() != static_cast<std::size_t>(as.back()))
    throw IncompatibleCheckpoint("checkpoint log_std does not match the action dimension");
  p.net.log_std = ls.f32;
  p.normalize = meta.at("normalize_obs").get<bool>();
  p.actor_norm = load_rms(ck, "actor_norm");
  p.critic_norm = load_rms(ck, "critic_norm");
  p.actor_norm.clip = p.critic_norm.clip = meta.at("obs_clip").get<double>();
  p.actor_norm.epsilon = p.critic_norm.epsilon = meta.at("obs_epsilon").get<double>();
  if (p.actor_norm.dim() != as.front() || p.critic_norm.dim() != cs.front())
    throw IncompatibleCheckpoint("checkpoint normalizers do not match the network inputs");
  return p;
}

void Policy::check_compatible(int actor_dim, int critic_dim, int action_dim, const PPOConfig& config) const {
  const auto want_a = layer_sizes(actor_dim, config.actor_hidden, action_dim);
  const auto want_c = layer_sizes(critic_dim, config.critic_hidden, 1);
  auto show = [](const std::vector<int>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "]";
  };
  if (net.actor.sizes() != want_a)
    throw IncompatibleCheckpoint("checkpoint actor layers " + show(net.actor.sizes()) + " but config implies " +
                                 show(want_a));
  if (net.critic.sizes() != want_c)
    throw IncompatibleCheckpoint("checkpoint critic layers " + show(net.critic.sizes()) + " but config implies " +
                                 show(want_c));
}

nlohmann::ordered_json to_json(const IterationStats& s, bool timing) {
  nlohmann::ordered_json j;
  j["iteration"] = s.iteration;
  j["global_step"] = s.global_step;
  j["lr"] = s.lr;
  j["policy_loss"] = s.update.policy_loss;
  j["value_loss"] = s.update.value_loss;
  j["approx_kl"] = s.update.approx_kl;
  j["clip_fraction"] = s.update.clip_fraction;
  j["entropy"] = s.update.entropy;
  j["actor_grad_norm"] = s.update.actor_grad_norm;
  j["critic_grad_norm"] = s.update.critic_grad_norm;
  j["mean_reward"] = s.mean_reward;
  j["reward_fingertip_to_object"] = s.reward_fingertip_to_object;
  j["reward_fingertip_velocity"] = s.reward_fingertip_velocity;
  j["reward_object_goal"] = s.reward_object_goal;
  j["episodes"] = s.episodes;
  j["success_rate"] = s.success_rate;
  j["success_any_rate"] = s.success_any_rate;
  j["mean_episode_return"] = s.mean_episode_return;
  j["mean_final_pos_err"] = s.mean_final_pos_err;
  j["mean_final_rot_err"] = s.mean_final_rot_err;
  j["faults"] = s.faults;
  if (timing) {
    j["collect_seconds"] = s.collect_seconds;
    j["update_seconds"] = s.update_seconds;
    j["env_steps_per_second"] = s.env_steps_per_second;
  }
  return j;
}

Trainer::Trainer(EngineConfig config)
    : Trainer(config, make_env(config, config.run.num_envs, config.run.seed, config.run.workers)) {}

Trainer::Trainer(EngineConfig config, std::unique_ptr<VecEnv> env) : config_(std::move(config)), env_(std::move(env)) {
  config_.validate();
  const int n = env_->num_envs();
  horizon_ = config_.ppo.horizon(n);
  policy_.net = ActorCritic(env_->actor_dim(), env_->critic_dim(), env_->action_dim(), config_.ppo, config_.run.seed);
  policy_.actor_norm = RunningMeanStd(env_->actor_dim());
  policy_.critic_norm = RunningMeanStd(env_->critic_dim());
  policy_.normalize = config_.ppo.normalize_obs;
  opt_.actor = AdamState(policy_.net.actor.num_params());
  opt_.log_std = AdamState(policy_.net.log_std.size());
  opt_.critic = AdamState(policy_.net.critic.num_params());
  batch_.allocate(horizon_, n, env_->actor_dim(), env_->critic_dim(), env_->action_dim());
}

void Trainer::collect(IterationStats& stats) {
  const int n = env_->num_envs();
  const int ad = env_->actor_dim(), cd = env_->critic_dim(), A = env_->action_dim();
  const bool norm = policy_.normalize;
  // Statistics gathered during the rollout only take effect afterwards, so
  // every sample of a batch sees the same normalization.
  RunningMeanStd pending_a(ad), pending_c(cd);
  std::vector<float> a_obs, c_obs;
  double reward_sum = 0.0, fo = 0.0, fv = 0.0, og = 0.0, ret = 0.0, perr = 0.0, rerr = 0.0;
  int succ = 0, succ_any = 0;
  episodes_.clear();

  auto observe = [&](bool track) {
    a_obs = env_->actor_obs();
    c_obs = env_->critic_obs();
    if (norm) {
      if (track) {
        pending_a.update(a_obs);
        pending_c.update(c_obs);
      }
      policy_.actor_norm.normalize(a_obs);
      policy_.critic_norm.normalize(c_obs);
    }
  };

  for (int t = 0; t < horizon_; ++t) {
    observe(true);
    const std::uint64_t draw = global_step_ / static_cast<std::uint64_t>(n);
    ActResult ar = act(policy_.net, a_obs, n, true, config_.run.seed, draw);
    std::vector<float> values = evaluate_values(policy_.net, c_obs, n);
    const std::size_t s0 = static_cast<std::size_t>(t) * n;
    std::copy(a_obs.begin(), a_obs.end(), batch_.actor_obs.begin() + static_cast<std::ptrdiff_t>(s0 * ad));
    std::copy(c_obs.begin(), c_obs.end(), batch_.critic_obs.begin() + static_cast<std::ptrdiff_t>(s0 * cd));
    std::copy(ar.actions.begin(), ar.actions.end(), batch_.actions.begin() + static_cast<std::ptrdiff_t>(s0 * A));

    std::vector<float> clamped = ar.actions;
    for (float& a : clamped) a = std::clamp(a, -1.0f, 1.0f);
    env_->step(clamped, global_step_);
    global_step_ += static_cast<std::uint64_t>(n);

    const auto& r = env_->rewards();
    const auto& d = env_->dones();
    const auto terms = env_->reward_terms();
    for (int i = 0; i < n; ++i) {
      batch_.log_probs[s0 + i] = ar.log_probs[i];
      batch_.values[s0 + i] = values[i];
      batch_.rewards[s0 + i] = static_cast<double>(r[i]) * config_.ppo.reward_scale;
      batch_.dones[s0 + i] = d[i];
      reward_sum += r[i];
    }
    // Logged as weighted contributions to the reward, curriculum included.
    const auto& task = config_.task;
    const bool approach = global_step_ - n <= task.curriculum_cutoff;
    for (const auto& term : terms) {
      if (approach) fo += task.w_fingertip_to_object * term.fingertip_to_object;
      fv += task.w_fingertip_velocity * term.fingertip_velocity_penalty;
      og += task.w_object_goal * term.object_goal_reward;
    }
    for (const EpisodeRecord& e : env_->finished()) {
      episodes_.push_back(e);
      stats.episodes += 1;
      succ += e.success;
      succ_any += e.success_any;
      stats.faults += e.fault;
      ret += e.episode_return;
      perr += e.final_pos_err;
      rerr += e.final_rot_err;
    }
  }
  // The bootstrap observation opens the next rollout and is counted there.
  observe(false);
  const std::vector<float> boot = evaluate_values(policy_.net, c_obs, n);
  for (int i = 0; i < n; ++i) batch_.bootstrap[i] = boot[i];
  GaeResult g = gae(batch_.rewards, batch_.values, batch_.dones, batch_.bootstrap, n, config_.ppo.gamma,
                    config_.ppo.tau);
  batch_.advantages = std::move(g.advantages);
  batch_.returns = std::move(g.returns);
  if (norm) {
    policy_.actor_norm.merge(pending_a);
    policy_.critic_norm.merge(pending_c);
  }

  const double samples = static_cast<double>(batch_.size());
  stats.mean_reward = reward_sum / samples;
  stats.reward_fingertip_to_object = fo / samples;
  stats.reward_fingertip_velocity = fv / samples;
  stats.reward_object_goal = og / samples;
  if (stats.episodes > 0) {
    const double e = stats.episodes;
    stats.success_rate = succ / e;
    stats.success_any_rate = succ_any / e;
    stats.mean_episode_return = ret / e;
    stats.mean_final_pos_err = perr / e;
    stats.mean_final_rot_err = rerr / e;
  }
}

IterationStats Trainer::iterate() {
  IterationStats stats;
  stats.iteration = iteration_;
  stats.lr = lr_schedule(std::min(global_step_, config_.run.total_steps), config_.run.total_steps, config_.ppo);

  auto t0 = Clock::now();
  collect(stats);
  stats.collect_seconds = seconds_since(t0);

  t0 = Clock::now();
  try {
    stats.update = ppo_update(batch_, policy_.net, opt_, config_.ppo, stats.lr, config_.run.seed,
                              static_cast<std::uint64_t>(iteration_));
  } catch (const NonFiniteError& e) {
    if (!dump_path_) throw;
    Checkpoint dump;
    dump.manifest["kind"] = "nonfinite-batch";
    dump.manifest["iteration"] = iteration_;
    dump.manifest["global_step"] = global_step_;
    dump.manifest["error"] = e.what();
    const auto T = static_cast<std::int64_t>(batch_.horizon), N = static_cast<std::int64_t>(batch_.num_envs);
    dump.add("actor_obs", {T, N, batch_.actor_dim}, batch_.actor_obs);
    dump.add("critic_obs", {T, N, batch_.critic_dim}, batch_.critic_obs);
    dump.add("actions", {T, N, batch_.action_dim}, batch_.actions);
    dump.add("log_probs", {T, N}, batch_.log_probs);
    dump.add("values", {T, N}, batch_.values);
    dump.add("rewards", {T, N}, batch_.rewards);
    dump.add("advantages", {T, N}, batch_.advantages);
    dump.add("returns", {T, N}, batch_.returns);
    policy_.save(dump);
    write_checkpoint(*dump_path_, dump);
    throw NonFiniteError(std::string(e.what()) + " (batch written to " + dump_path_->string() + ")");
  }
  stats.update_seconds = seconds_since(t0);

  stats.global_step = global_step_;
  const double total = stats.collect_seconds + stats.update_seconds;
  stats.env_steps_per_second = total > 0 ? batch_.size() / total : 0.0;
  iteration_ += 1;
  return stats;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.manifest["kind"] = "training-state";
  ck.manifest["global_step"] = global_step_;
  ck.manifest["iteration"] = iteration_;
  ck.manifest["seed"] = config_.run.seed;
  ck.manifest["config_hash"] = config_hash(config_);
  ck.manifest["rng"] = {{"generator", "philox4x32-10 counter"},
                        {"policy_draw_index", global_step_ / static_cast<std::uint64_t>(env_->num_envs())},
                        {"shuffle_index", iteration_}};
  ck.manifest["config"] = to_json(config_);
  policy_.save(ck);
  save_adam(ck, "opt.actor", opt_.actor);
  save_adam(ck, "opt.log_std", opt_.log_std);
  save_adam(ck, "opt.critic", opt_.critic);
  const std::vector<double> snap = env_->snapshot();
  ck.add("env.state", {static_cast<std::int64_t>(snap.size())}, snap);
  return ck;
}

void Trainer::restore(const Checkpoint& ck) {
  if (ck.manifest.value("kind", "") != "training-state")
    throw IncompatibleCheckpoint("checkpoint does not hold a resumable training state");
  if (ck.manifest.at("config_hash").get<std::string>() != config_hash(config_))
    throw IncompatibleCheckpoint("checkpoint was written under a different config (hash " +
                                 ck.manifest.at("config_hash").get<std::string>() + ", expected " +
                                 config_hash(config_) + ")");
  Policy p = Policy::load(ck);
  p.check_compatible(env_->actor_dim(), env_->critic_dim(), env_->action_dim(), config_.ppo);
  OptimizerState o;
  o.actor = load_adam(ck, "opt.actor", p.net.actor.num_params());
  o.log_std = load_adam(ck, "opt.log_std", p.net.log_std.size());
  o.critic = load_adam(ck, "opt.critic", p.net.critic.num_params());
  env_->restore(ck.tensor("env.state").f64);
  policy_ = std::move(p);
  opt_ = std::move(o);
  global_step_ = ck.manifest.at("global_step").get<std::uint64_t>();
  iteration_ = ck.manifest.at("iteration").get<int>();
}

}  // namespace reposer
