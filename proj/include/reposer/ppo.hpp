#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "reposer/nn.hpp"

namespace reposer {

struct PPOConfig {
  double gamma = 0.99;
  double tau = 0.95;
  double lr_start = 5e-4;
  double lr_end = 1e-6;
  int batch_size = 65536;
  int minibatch_size = 16384;
  int epochs = 8;
  double clip = 0.2;
  double entropy_coef = 0.0;
  double value_coef = 1.0;
  // Global gradient norm bound per network; 0 disables clipping.
  double max_grad_norm = 1.0;
  // Rewards are multiplied by this before advantage estimation.
  double reward_scale = 0.01;
  bool normalize_obs = true;
  std::vector<int> actor_hidden{256, 256, 128, 128};
  std::vector<int> critic_hidden{512, 512, 256, 128};
  double init_std = 1.0;
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  void validate() const;
  /// Rollout length per env so that num_envs * horizon == batch_size.
  int horizon(int num_envs) const;
};

/// Linear interpolation from lr_start at step 0 to lr_end at total_steps.
double lr_schedule(std::uint64_t global_step, std::uint64_t total_steps, const PPOConfig& config);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Time-major (T x N) arrays. done[t, i] means the episode of env i ended with
/// the transition at t, so nothing is bootstrapped across it. `bootstrap` holds
/// V(s_T) for each env.
GaeResult gae(std::span<const double> rewards, std::span<const double> values, std::span<const std::uint8_t> dones,
              std::span<const double> bootstrap, int num_envs, double gamma, double tau);

/// Actor mean network, state-independent log-std, and critic.
struct ActorCritic {
  Mlp<float> actor;
  std::vector<float> log_std;
  Mlp<float> critic;

  ActorCritic() = default;
  ActorCritic(int actor_in, int critic_in, int action_dim, const PPOConfig& config, std::uint64_t seed);

  int action_dim() const { return actor.output_dim(); }
};

/// Log-density of a diagonal Gaussian, evaluated in double.
double gaussian_log_prob(std::span<const double> x, std::span<const double> mean, std::span<const double> log_std);

struct ActResult {
  std::vector<float> actions;  // N x A row-major, unclamped samples (or the mean)
  std::vector<double> log_probs;
};

/// obs: N x in row-major. Stochastic draws use one stream per env keyed by
/// (seed, env, draw_index).
ActResult act(const ActorCritic& net, std::span<const float> obs, int n, bool stochastic, std::uint64_t seed,
              std::uint64_t draw_index);

std::vector<float> evaluate_values(const ActorCritic& net, std::span<const float> critic_obs, int n);

struct PolicyLossStats {
  double loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
};

/// Clipped surrogate -mean(min(r A, clip(r) A)) - c_ent H over a minibatch
/// stored as columns. Gradients are accumulated into the given buffers.
template <typename Scalar>
PolicyLossStats policy_loss(const Mlp<Scalar>& actor, std::span<const Scalar> log_std,
                            const typename Mlp<Scalar>::Mat& obs, const typename Mlp<Scalar>::Mat& actions,
                            std::span<const double> old_log_probs, std::span<const double> advantages, double clip,
                            double entropy_coef, std::span<Scalar> grad_actor, std::span<Scalar> grad_log_std);

/// 0.5 * mean((V - R)^2).
template <typename Scalar>
double value_loss(const Mlp<Scalar>& critic, const typename Mlp<Scalar>::Mat& obs, std::span<const double> returns,
                  std::span<Scalar> grad_critic);

/// Flat rollout buffer, sample index = t * num_envs + env.
struct RolloutBatch {
  int horizon = 0;
  int num_envs = 0;
  int actor_dim = 0;
  int critic_dim = 0;
  int action_dim = 0;
  std::vector<float> actor_obs, critic_obs, actions;
  std::vector<double> log_probs, values, rewards;
  std::vector<std::uint8_t> dones;
  std::vector<double> bootstrap;
  std::vector<double> advantages, returns;

  void allocate(int horizon, int num_envs, int actor_dim, int critic_dim, int action_dim);
  int size() const { return horizon * num_envs; }
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  int minibatches = 0;
};

struct OptimizerState {
  AdamState actor;
  AdamState log_std;
  AdamState critic;
};

/// Raised when a loss or gradient turns non-finite; parameters are left as
/// they were before the offending minibatch.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normalizes advantages over the whole batch, then runs `epochs` passes of
/// shuffled minibatches. `shuffle_index` keys the permutation stream.
UpdateStats ppo_update(RolloutBatch& batch, ActorCritic& net, OptimizerState& opt, const PPOConfig& config,
                       double lr, std::uint64_t seed, std::uint64_t shuffle_index);

}  // namespace reposer
