#include "reposer/ppo.hpp"

#include <algorithm>
#include <stdexcept>

namespace reposer {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

bool all_finite(std::span<const float> v) {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void clip_grad(std::span<float> g, double max_norm, double& norm_out) {
  norm_out = global_norm(g);
  if (max_norm > 0.0 && norm_out > max_norm) {
    const float s = static_cast<float>(max_norm / (norm_out + 1e-12));
    for (float& v : g) v *= s;
  }
}

}  // namespace

void PPOConfig::validate() const {
  require(gamma >= 0 && gamma <= 1, "ppo: gamma must be in [0, 1]");
  require(tau >= 0 && tau <= 1, "ppo: tau must be in [0, 1]");
  require(lr_start > 0 && lr_end > 0 && lr_end <= lr_start, "ppo: need 0 < lr_end <= lr_start");
  require(batch_size > 0 && minibatch_size > 0, "ppo: batch sizes must be > 0");
  require(batch_size % minibatch_size == 0, "ppo: minibatch_size must divide batch_size");
  require(epochs > 0, "ppo: epochs must be > 0");
  require(clip > 0, "ppo: clip must be > 0");
  require(entropy_coef >= 0 && value_coef >= 0 && max_grad_norm >= 0, "ppo: coefficients must be >= 0");
  require(reward_scale > 0, "ppo: reward_scale must be > 0");
  require(!actor_hidden.empty() && !critic_hidden.empty(), "ppo: hidden layer lists must be non-empty");
  for (int h : actor_hidden) require(h > 0, "ppo: actor hidden sizes must be > 0");
  for (int h : critic_hidden) require(h > 0, "ppo: critic hidden sizes must be > 0");
  require(init_std > 0, "ppo: init_std must be > 0");
  require(log_std_min < log_std_max, "ppo: log_std_min must be < log_std_max");
}

int PPOConfig::horizon(int num_envs) const {
  require(num_envs > 0, "ppo: num_envs must be > 0");
  require(batch_size % num_envs == 0, "ppo: batch_size (" + std::to_string(batch_size) +
                                          ") must be a multiple of num_envs (" + std::to_string(num_envs) + ")");
  return batch_size / num_envs;
}

double lr_schedule(std::uint64_t global_step, std::uint64_t total_steps, const PPOConfig& config) {
  if (total_steps == 0) return config.lr_end;
  const double frac = std::min(1.0, static_cast<double>(global_step) / static_cast<double>(total_steps));
  return config.lr_start + (config.lr_end - config.lr_start) * frac;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values, std::span<const std::uint8_t> dones,
              std::span<const double> bootstrap, int num_envs, double gamma, double tau) {
  require(num_envs > 0, "gae: num_envs must be > 0");
  const std::size_t n = static_cast<std::size_t>(num_envs);
  require(rewards.size() % n == 0, "gae: rewards are not T x num_envs");
  require(values.size() == rewards.size() && dones.size() == rewards.size(), "gae: rewards/values/dones differ");
  require(bootstrap.size() == n, "gae: bootstrap must have num_envs entries");
  const std::size_t T = rewards.size() / n;
  GaeResult out;
  out.advantages.assign(rewards.size(), 0.0);
  out.returns.assign(rewards.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double next_value = bootstrap[i];
    double next_adv = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      const std::size_t k = t * n + i;
      const double live = dones[k] ? 0.0 : 1.0;
      const double delta = rewards[k] + gamma * next_value * live - values[k];
      next_adv = delta + gamma * tau * live * next_adv;
      out.advantages[k] = next_adv;
      out.returns[k] = next_adv + values[k];
      next_value = values[k];
    }
  }
  return out;
}

ActorCritic::ActorCritic(int actor_in, int critic_in, int action_dim, const PPOConfig& config, std::uint64_t seed) {
  std::vector<int> a{actor_in};
  a.insert(a.end(), config.actor_hidden.begin(), config.actor_hidden.end());
  a.push_back(action_dim);
  std::vector<int> c{critic_in};
  c.insert(c.end(), config.critic_hidden.begin(), config.critic_hidden.end());
  c.push_back(1);
  actor = Mlp<float>(a);
  critic = Mlp<float>(c);
  actor.init_orthogonal(seed, std::sqrt(2.0), 0.01);
  critic.init_orthogonal(seed ^ 0x5A5A5A5A5A5A5A5AULL, std::sqrt(2.0), 1.0);
  log_std.assign(static_cast<std::size_t>(action_dim), static_cast<float>(std::log(config.init_std)));
}

double gaussian_log_prob(std::span<const double> x, std::span<const double> mean, std::span<const double> log_std) {
  double lp = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double z = (x[k] - mean[k]) * std::exp(-log_std[k]);
    lp += -0.5 * z * z - log_std[k] - kHalfLog2Pi;
  }
  return lp;
}

ActResult act(const ActorCritic& net, std::span<const float> obs, int n, bool stochastic, std::uint64_t seed,
              std::uint64_t draw_index) {
  const int in = net.actor.input_dim();
  const int A = net.action_dim();
  if (n < 0 || obs.size() != static_cast<std::size_t>(n) * in)
    throw std::invalid_argument("act: observation batch is not n x " + std::to_string(in));
  ActResult out;
  out.actions.resize(static_cast<std::size_t>(n) * A);
  out.log_probs.resize(static_cast<std::size_t>(n));
  if (n == 0) return out;
  const Mlp<float>::Mat x = Eigen::Map<const Mlp<float>::Mat>(obs.data(), in, n);
  const Mlp<float>::Mat mu = net.actor.forward(x);
  std::vector<double> ls(net.log_std.begin(), net.log_std.end());
  std::vector<double> m(A), a(A);
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i), draw_index, Stream::Policy);
    for (int k = 0; k < A; ++k) {
      m[k] = mu(k, i);
      a[k] = stochastic ? m[k] + std::exp(ls[k]) * rng.normal() : m[k];
      out.actions[static_cast<std::size_t>(i) * A + k] = static_cast<float>(a[k]);
      // The density is evaluated at the float action the env receives.
      a[k] = out.actions[static_cast<std::size_t>(i) * A + k];
    }
    out.log_probs[i] = gaussian_log_prob(a, m, ls);
  }
  return out;
}

std::vector<float> evaluate_values(const ActorCritic& net, std::span<const float> critic_obs, int n) {
  const int in = net.critic.input_dim();
  if (n < 0 || critic_obs.size() != static_cast<std::size_t>(n) * in)
    throw std::invalid_argument("evaluate_values: observation batch is not n x " + std::to_string(in));
  if (n == 0) return {};
  const Mlp<float>::Mat x = Eigen::Map<const Mlp<float>::Mat>(critic_obs.data(), in, n);
  const Mlp<float>::Mat v = net.critic.forward(x);
  return std::vector<float>(v.data(), v.data() + n);
}

template <typename Scalar>
PolicyLossStats policy_loss(const Mlp<Scalar>& actor, std::span<const Scalar> log_std,
                            const typename Mlp<Scalar>::Mat& obs, const typename Mlp<Scalar>::Mat& actions,
                            std::span<const double> old_log_probs, std::span<const double> advantages, double clip,
                            double entropy_coef, std::span<Scalar> grad_actor, std::span<Scalar> grad_log_std) {
  using Mat = typename Mlp<Scalar>::Mat;
  const int M = static_cast<int>(obs.cols());
  const int A = actor.output_dim();
  if (actions.rows() != A || actions.cols() != M || old_log_probs.size() != static_cast<std::size_t>(M) ||
      advantages.size() != static_cast<std::size_t>(M) || log_std.size() != static_cast<std::size_t>(A) ||
      grad_log_std.size() != static_cast<std::size_t>(A))
    throw std::invalid_argument("policy_loss: shape mismatch");
  typename Mlp<Scalar>::Cache cache;
  const Mat mu = actor.forward(obs, &cache);
  std::vector<double> ls(A), inv_var(A);
  for (int k = 0; k < A; ++k) {
    ls[k] = static_cast<double>(log_std[k]);
    inv_var[k] = std::exp(-2.0 * ls[k]);
  }
  Mat d_mu(A, M);
  std::vector<double> d_ls(A, 0.0);
  PolicyLossStats st;
  const double inv_m = 1.0 / M;
  for (int j = 0; j < M; ++j) {
    double lp = 0.0;
    for (int k = 0; k < A; ++k) {
      const double d = static_cast<double>(actions(k, j)) - static_cast<double>(mu(k, j));
      lp += -0.5 * d * d * inv_var[k] - ls[k] - kHalfLog2Pi;
    }
    const double log_ratio = lp - old_log_probs[j];
    const double ratio = std::exp(log_ratio);
    const double adv = advantages[j];
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
    st.loss -= std::min(surr1, surr2) * inv_m;
    st.approx_kl += ((ratio - 1.0) - log_ratio) * inv_m;
    if (std::abs(ratio - 1.0) > clip) st.clip_fraction += inv_m;
    // d loss / d logp; zero where the clipped branch is the minimum.
    const double g = surr1 <= surr2 ? -adv * ratio * inv_m : 0.0;
    for (int k = 0; k < A; ++k) {
      const double d = static_cast<double>(actions(k, j)) - static_cast<double>(mu(k, j));
      d_mu(k, j) = static_cast<Scalar>(g * d * inv_var[k]);
      d_ls[k] += g * (d * d * inv_var[k] - 1.0);
    }
  }
  for (int k = 0; k < A; ++k) st.entropy += ls[k] + 0.5 + kHalfLog2Pi;
  st.loss -= entropy_coef * st.entropy;
  for (int k = 0; k < A; ++k) grad_log_std[k] += static_cast<Scalar>(d_ls[k] - entropy_coef);
  actor.backward(cache, d_mu, grad_actor);
  return st;
}

template <typename Scalar>
double value_loss(const Mlp<Scalar>& critic, const typename Mlp<Scalar>::Mat& obs, std::span<const double> returns,
                  std::span<Scalar> grad_critic) {
  using Mat = typename Mlp<Scalar>::Mat;
  const int M = static_cast<int>(obs.cols());
  if (returns.size() != static_cast<std::size_t>(M) || critic.output_dim() != 1)
    throw std::invalid_argument("value_loss: shape mismatch");
  typename Mlp<Scalar>::Cache cache;
  const Mat v = critic.forward(obs, &cache);
  Mat d_v(1, M);
  double loss = 0.0;
  for (int j = 0; j < M; ++j) {
    const double e = static_cast<double>(v(0, j)) - returns[j];
    loss += 0.5 * e * e / M;
    d_v(0, j) = static_cast<Scalar>(e / M);
  }
  critic.backward(cache, d_v, grad_critic);
  return loss;
}

template PolicyLossStats policy_loss<float>(const Mlp<float>&, std::span<const float>, const Mlp<float>::Mat&,
                                            const Mlp<float>::Mat&, std::span<const double>, std::span<const double>,
                                            double, double, std::span<float>, std::span<float>);
template PolicyLossStats policy_loss<double>(const Mlp<double>&, std::span<const double>, const Mlp<double>::Mat&,
                                             const Mlp<double>::Mat&, std::span<const double>,
                                             std::span<const double>, double, double, std::span<double>,
                                             std::span<double>);
template double value_loss<float>(const Mlp<float>&, const Mlp<float>::Mat&, std::span<const double>,
                                  std::span<float>);
template double value_loss<double>(const Mlp<double>&, const Mlp<double>::Mat&, std::span<const double>,
                                   std::span<double>);

void RolloutBatch::allocate(int h, int n, int adim, int cdim, int act_dim) {
  horizon = h;
  num_envs = n;
  actor_dim = adim;
  critic_dim = cdim;
  action_dim = act_dim;
  const std::size_t s = static_cast<std::size_t>(h) * n;
  actor_obs.assign(s * adim, 0.0f);
  critic_obs.assign(s * cdim, 0.0f);
  actions.assign(s * act_dim, 0.0f);
  log_probs.assign(s, 0.0);
  values.assign(s, 0.0);
  rewards.assign(s, 0.0);
  dones.assign(s, 0);
  bootstrap.assign(static_cast<std::size_t>(n), 0.0);
  advantages.assign(s, 0.0);
  returns.assign(s, 0.0);
}

UpdateStats ppo_update(RolloutBatch& batch, ActorCritic& net, OptimizerState& opt, const PPOConfig& config,
                       double lr, std::uint64_t seed, std::uint64_t shuffle_index) {
  const int S = batch.size();
  const int M = std::min(config.minibatch_size, S);
  if (S == 0) return {};
  if (S % M != 0) throw std::invalid_argument("ppo_update: minibatch size must divide the batch");
  if (opt.actor.m.size() != net.actor.num_params()) opt.actor = AdamState(net.actor.num_params());
  if (opt.log_std.m.size() != net.log_std.size()) opt.log_std = AdamState(net.log_std.size());
  if (opt.critic.m.size() != net.critic.num_params()) opt.critic = AdamState(net.critic.num_params());

  // Advantage normalization over the whole batch.
  std::vector<double> adv = batch.advantages;
  double mean = 0.0, var = 0.0;
  for (double a : adv) mean += a;
  mean /= S;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / S);
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);

  const int A = batch.action_dim, AD = batch.actor_dim, CD = batch.critic_dim;
  std::vector<int> perm(S);
  Mlp<float>::Mat obs(AD, M), cobs(CD, M), actions(A, M);
  std::vector<double> old_lp(M), mb_adv(M), mb_ret(M);
  AlignedVector<float> g_actor(net.actor.num_params()), g_ls(net.log_std.size()), g_critic(net.critic.num_params());
  UpdateStats st;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = 0; i < S; ++i) perm[i] = i;
    CounterRng rng(seed, 0, shuffle_index * static_cast<std::uint64_t>(config.epochs) + epoch, Stream::Shuffle);
    for (int i = S - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform() * (i + 1));
      std::swap(perm[i], perm[std::min(j, i)]);
    }
    for (int start = 0; start < S; start += M) {
      for (int c = 0; c < M; ++c) {
        const int s = perm[start + c];
        std::copy_n(&batch.actor_obs[static_cast<std::size_t>(s) * AD], AD, obs.col(c).data());
        std::copy_n(&batch.critic_obs[static_cast<std::size_t>(s) * CD], CD, cobs.col(c).data());
        std::copy_n(&batch.actions[static_cast<std::size_t>(s) * A], A, actions.col(c).data());
        old_lp[c] = batch.log_probs[s];
        mb_adv[c] = adv[s];
        mb_ret[c] = batch.returns[s];
      }
      std::fill(g_actor.begin(), g_actor.end(), 0.0f);
      std::fill(g_ls.begin(), g_ls.end(), 0.0f);
      std::fill(g_critic.begin(), g_critic.end(), 0.0f);
      const PolicyLossStats ps = policy_loss<float>(net.actor, net.log_std, obs, actions, old_lp, mb_adv, config.clip,
                                                    config.entropy_coef, g_actor, g_ls);
      const double vl = value_loss<float>(net.critic, cobs, mb_ret, g_critic);
      if (config.value_coef != 1.0)
        for (float& g : g_critic) g *= static_cast<float>(config.value_coef);
      if (!std::isfinite(ps.loss) || !std::isfinite(vl) || !all_finite(g_actor) || !all_finite(g_ls) ||
          !all_finite(g_critic))
        throw NonFiniteError("ppo_update: non-finite loss or gradient (policy " + std::to_string(ps.loss) +
                             ", value " + std::to_string(vl) + ")");
      // The log-std is clipped jointly with the actor weights.
      std::vector<float> joint(g_actor.begin(), g_actor.end());
      joint.insert(joint.end(), g_ls.begin(), g_ls.end());
      double an = 0.0, cn = 0.0;
      clip_grad(joint, config.max_grad_norm, an);
      clip_grad(g_critic, config.max_grad_norm, cn);
      opt.actor.apply(net.actor.params(), std::span<const float>(joint.data(), g_actor.size()), lr);
      opt.log_std.apply(net.log_std, std::span<const float>(joint.data() + g_actor.size(), g_ls.size()), lr);
      opt.critic.apply(net.critic.params(), g_critic, lr);
      for (float& l : net.log_std)
        l = std::clamp(l, static_cast<float>(config.log_std_min), static_cast<float>(config.log_std_max));

      st.policy_loss += ps.loss;
      st.value_loss += vl;
      st.approx_kl += ps.approx_kl;
      st.clip_fraction += ps.clip_fraction;
      st.entropy += ps.entropy;
      st.actor_grad_norm += an;
      st.critic_grad_norm += cn;
      st.minibatches += 1;
    }
  }
  const double k = 1.0 / st.minibatches;
  st.policy_loss *= k;
  st.value_loss *= k;
  st.approx_kl *= k;
  st.clip_fraction *= k;
  st.entropy *= k;
  st.actor_grad_norm *= k;
  st.critic_grad_norm *= k;
  return st;
}

}  // namespace reposer
