#include "reposer/reach.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace reposer {

void ReachConfig::validate() const {
  if (episode_length <= 0) throw std::invalid_argument("reach: episode_length must be > 0");
  if (!(max_step > 0) || !(arena_radius > 0) || !(goal_radius > 0) || goal_radius > arena_radius)
    throw std::invalid_argument("reach: need 0 < goal_radius <= arena_radius and max_step > 0");
  if (!(kernel.a > 0) || !(kernel.b >= 0)) throw std::invalid_argument("reach: kernel needs a > 0 and b >= 0");
  if (!(success_radius > 0)) throw std::invalid_argument("reach: success_radius must be > 0");
}

ReachEnv::ReachEnv(ReachConfig config, int num_envs, std::uint64_t seed)
    : config_(config),
      n_(num_envs),
      seed_(seed),
      pos_(static_cast<std::size_t>(num_envs)),
      goal_(static_cast<std::size_t>(num_envs)),
      step_(static_cast<std::size_t>(num_envs), 0),
      episode_(static_cast<std::size_t>(num_envs), 0),
      return_(static_cast<std::size_t>(num_envs), 0.0),
      obs_(static_cast<std::size_t>(num_envs) * kObsDim, 0.0f),
      rewards_(static_cast<std::size_t>(num_envs), 0.0f),
      dones_(static_cast<std::size_t>(num_envs), 0) {
  if (num_envs <= 0) throw std::invalid_argument("ReachEnv: num_envs must be > 0");
  config_.validate();
  reset_all();
}

void ReachEnv::reset_all() {
  for (int i = 0; i < n_; ++i) reset_env(i);
  std::fill(rewards_.begin(), rewards_.end(), 0.0f);
  std::fill(dones_.begin(), dones_.end(), 0);
  finished_.clear();
}

void ReachEnv::reset_env(int i) {
  CounterRng rng(seed_, static_cast<std::uint64_t>(i), episode_[i], Stream::Reach);
  auto disc = [&] {
    const double r = config_.goal_radius * std::sqrt(rng.uniform());
    const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return std::array<double, 2>{r * std::cos(t), r * std::sin(t)};
  };
  pos_[i] = disc();
  goal_[i] = disc();
  step_[i] = 0;
  return_[i] = 0.0;
  write_obs(i);
}

void ReachEnv::write_obs(int i) {
  float* o = &obs_[static_cast<std::size_t>(i) * kObsDim];
  o[0] = static_cast<float>(pos_[i][0]);
  o[1] = static_cast<float>(pos_[i][1]);
  o[2] = static_cast<float>(goal_[i][0]);
  o[3] = static_cast<float>(goal_[i][1]);
}

void ReachEnv::step(std::span<const float> actions, std::uint64_t) {
  if (actions.size() != static_cast<std::size_t>(n_) * kActionDim)
    throw std::invalid_argument("ReachEnv::step: actions must be num_envs x 2");
  finished_.clear();
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < 2; ++k) {
      float a = actions[static_cast<std::size_t>(i) * kActionDim + k];
      if (!std::isfinite(a)) a = 0.0f;
      pos_[i][k] += config_.max_step * std::clamp(static_cast<double>(a), -1.0, 1.0);
    }
    const double r = std::hypot(pos_[i][0], pos_[i][1]);
    if (r > config_.arena_radius) {
      pos_[i][0] *= config_.arena_radius / r;
      pos_[i][1] *= config_.arena_radius / r;
    }
    const double dist = std::hypot(pos_[i][0] - goal_[i][0], pos_[i][1] - goal_[i][1]);
    const double reward = logistic_kernel(dist, config_.kernel);
    rewards_[i] = static_cast<float>(reward);
    return_[i] += reward;
    step_[i] += 1;
    if (step_[i] >= config_.episode_length) {
      EpisodeRecord rec;
      rec.episode = episode_[i];
      rec.env_id = i;
      rec.success = dist < config_.success_radius;
      rec.success_any = rec.success;
      rec.final_pos_err = dist;
      rec.episode_return = return_[i];
      finished_.push_back(rec);
      dones_[i] = 1;
      episode_[i] += 1;
      reset_env(i);
    } else {
      dones_[i] = 0;
      write_obs(i);
    }
  }
}

std::vector<float> ReachEnv::oracle_actions() const {
  std::vector<float> a(static_cast<std::size_t>(n_) * kActionDim);
  for (int i = 0; i < n_; ++i) {
    double dx = (goal_[i][0] - pos_[i][0]) / config_.max_step;
    double dy = (goal_[i][1] - pos_[i][1]) / config_.max_step;
    const double m = std::max(std::abs(dx), std::abs(dy));
    if (m > 1.0) {
      dx /= m;
      dy /= m;
    }
    a[static_cast<std::size_t>(i) * 2] = static_cast<float>(dx);
    a[static_cast<std::size_t>(i) * 2 + 1] = static_cast<float>(dy);
  }
  return a;
}

std::vector<double> ReachEnv::snapshot() const {
  std::vector<double> out{static_cast<double>(n_)};
  for (int i = 0; i < n_; ++i) {
    out.insert(out.end(), {pos_[i][0], pos_[i][1], goal_[i][0], goal_[i][1], static_cast<double>(step_[i]),
                           static_cast<double>(episode_[i]), return_[i]});
  }
  return out;
}

void ReachEnv::restore(std::span<const double> data) {
  if (data.size() != 1 + 7 * static_cast<std::size_t>(n_) || static_cast<int>(data[0]) != n_)
    throw std::invalid_argument("reach snapshot: size mismatch");
  for (int i = 0; i < n_; ++i) {
    const double* d = &data[1 + 7 * static_cast<std::size_t>(i)];
    pos_[i] = {d[0], d[1]};
    goal_[i] = {d[2], d[3]};
    step_[i] = static_cast<int>(d[4]);
    episode_[i] = static_cast<std::uint64_t>(d[5]);
    return_[i] = d[6];
    write_obs(i);
  }
}

}  // namespace reposer
