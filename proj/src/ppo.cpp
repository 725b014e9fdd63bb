#include "asknav/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asknav/error.hpp"
#include "asknav/rng.hpp"

namespace asknav {

void PpoConfig::validate() const {
  auto fail = [](const char* what) {
    throw Error(ErrorCode::kInvalidArgument, std::string("ppo config: ") + what);
  };
  if (total_timesteps < 0) fail("total_timesteps must be >= 0");
  if (rollout_length <= 0) fail("rollout_length must be positive");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip_epsilon in (0, 1)");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) fail("gae_lambda in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma in (0, 1]");
  if (epochs_per_update <= 0) fail("epochs_per_update must be positive");
  if (minibatch_size <= 0) fail("minibatch_size must be positive");
  if (entropy_coeff < 0.0) fail("entropy_coeff must be >= 0");
  if (!(value_coeff > 0.0)) fail("value_coeff must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(max_grad_norm > 0.0)) fail("max_grad_norm must be positive");
  if (hidden_width == 0) fail("hidden_width must be positive");
}

nlohmann::json ppo_config_to_json(const PpoConfig& c) {
  return {{"total_timesteps", c.total_timesteps},
          {"rollout_length", c.rollout_length},
          {"clip_epsilon", c.clip_epsilon},
          {"gae_lambda", c.gae_lambda},
          {"gamma", c.gamma},
          {"epochs_per_update", c.epochs_per_update},
          {"minibatch_size", c.minibatch_size},
          {"entropy_coeff", c.entropy_coeff},
          {"value_coeff", c.value_coeff},
          {"learning_rate", c.learning_rate},
          {"max_grad_norm", c.max_grad_norm},
          {"hidden_width", c.hidden_width}};
}

PpoConfig ppo_config_from_json(const nlohmann::json& j) {
  PpoConfig c;
  c.total_timesteps = j.value("total_timesteps", c.total_timesteps);
  c.rollout_length = j.value("rollout_length", c.rollout_length);
  c.clip_epsilon = j.value("clip_epsilon", c.clip_epsilon);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  c.gamma = j.value("gamma", c.gamma);
  c.epochs_per_update = j.value("epochs_per_update", c.epochs_per_update);
  c.minibatch_size = j.value("minibatch_size", c.minibatch_size);
  c.entropy_coeff = j.value("entropy_coeff", c.entropy_coeff);
  c.value_coeff = j.value("value_coeff", c.value_coeff);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.hidden_width = j.value("hidden_width", c.hidden_width);
  c.validate();
  return c;
}

MlpParams make_critic(std::size_t input_size, std::size_t hidden,
                      std::uint64_t seed) {
  return init_mlp({input_size, hidden, hidden, 1}, seed);
}

std::vector<double> chain_forward(std::span<const MlpParams> chain,
                                  std::span<const double> input) {
  std::vector<double> x(input.begin(), input.end());
  for (const MlpParams& link : chain) x = mlp_predict(link, x);
  return x;
}

GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values, double gamma,
                      double gae_lambda) {
  std::vector<std::uint8_t> dones(rewards.size(), 0);
  if (!dones.empty()) dones.back() = 1;
  return compute_gae(rewards, values, dones, 0.0, gamma, gae_lambda);
}

GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values,
                      std::span<const std::uint8_t> dones, double last_value,
                      double gamma, double gae_lambda) {
  if (rewards.size() != values.size() || rewards.size() != dones.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "rewards, values and dones must have equal length");
  }
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value =
        dones[t] ? 0.0 : (t + 1 < n ? values[t + 1] : last_value);
    const double carry = dones[t] ? 0.0 : running;
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * gae_lambda * carry;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  const double mean =
      std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= n;
  const double scale = advantages.size() > 1 ? 1.0 / (std::sqrt(var) + 1e-8) : 1.0;
  for (double& a : advantages) a = (a - mean) * scale;
}

PpoLoss ppo_loss(const ActorCritic& model, const PpoMinibatch& batch,
                 const PpoConfig& config) {
  const std::size_t n = batch.actions.size();
  if (batch.observations.size() != n || batch.old_log_probs.size() != n ||
      batch.advantages.size() != n || batch.returns.size() != n || n == 0) {
    throw Error(ErrorCode::kLengthMismatch, "inconsistent PPO minibatch");
  }
  PpoLoss out;
  for (const MlpParams& link : model.actor) {
    out.actor_grads.push_back(MlpParams::zeros(link.layer_sizes));
  }
  out.critic_grads = MlpParams::zeros(model.critic.layer_sizes);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lo = 1.0 - config.clip_epsilon;
  const double hi = 1.0 + config.clip_epsilon;

  std::vector<MlpCache> caches(model.actor.size());
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> x = batch.observations[s];
    for (std::size_t k = 0; k < model.actor.size(); ++k) {
      MlpOutput fwd = mlp_forward(model.actor[k], x);
      x = std::move(fwd.output);
      caches[k] = std::move(fwd.cache);
    }
    const std::vector<double> logp = log_softmax(x);
    const std::size_t a = batch.actions[s];
    if (a >= logp.size()) throw Error(ErrorCode::kLabelOutOfRange, "action index");
    const double adv = batch.advantages[s];
    const double ratio = std::exp(logp[a] - batch.old_log_probs[s]);
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, lo, hi) * adv;
    out.policy_loss -= std::min(surr1, surr2) * inv_n;
    if (ratio < lo || ratio > hi) out.clip_fraction += inv_n;

    double entropy = 0.0;
    for (double lp : logp) entropy -= std::exp(lp) * lp;
    out.entropy += entropy * inv_n;

    // d(-min(surr1, surr2))/d logp[a]; zero when the clipped branch binds.
    const double d_logp = surr1 <= surr2 ? -adv * ratio : 0.0;
    std::vector<double> g(logp.size());
    for (std::size_t j = 0; j < logp.size(); ++j) {
      const double p = std::exp(logp[j]);
      const double d_surrogate = d_logp * ((j == a ? 1.0 : 0.0) - p);
      const double d_entropy = -p * (logp[j] + entropy);
      g[j] = (d_surrogate - config.entropy_coeff * d_entropy) * inv_n;
    }
    for (std::size_t k = model.actor.size(); k-- > 0;) {
      std::vector<double> input_grad;
      mlp_backward_accumulate(model.actor[k], caches[k], g, out.actor_grads[k],
                              k > 0 ? &input_grad : nullptr);
      g = std::move(input_grad);
    }

    MlpOutput v = mlp_forward(model.critic, batch.observations[s]);
    const double err = v.output[0] - batch.returns[s];
    out.value_loss += 0.5 * err * err * inv_n;
    const double dv = config.value_coeff * err * inv_n;
    mlp_backward_accumulate(model.critic, v.cache, std::span<const double>(&dv, 1),
                            out.critic_grads);
  }
  return out;
}

namespace {

struct Rollout {
  std::vector<std::vector<double>> observations;
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
};

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kDivergedTraining, std::string("non-finite ") + what);
  }
}

}  // namespace

void ppo_train(DiscreteEnv& env, ActorCritic& model, const PpoConfig& config,
               std::uint64_t seed, const PpoCallback& on_update) {
  config.validate();
  if (model.actor.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "actor chain is empty");
  }
  if (model.actor.front().input_size() != env.observation_size() ||
      model.actor.back().output_size() != env.num_actions() ||
      model.critic.input_size() != env.observation_size() ||
      model.critic.output_size() != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "actor/critic shapes do not match the environment");
  }
  if (config.total_timesteps == 0) return;

  Rng rng(mix_seed(seed, 0x505f));
  std::vector<OptState> actor_opt;
  for (const MlpParams& link : model.actor) {
    actor_opt.push_back(make_opt_state(link, config.learning_rate));
  }
  OptState critic_opt = make_opt_state(model.critic, config.learning_rate);

  std::vector<double> obs = env.reset();
  double episode_return = 0.0;
  long timesteps = 0;
  int update = 0;
  while (timesteps < config.total_timesteps) {
    const long budget = std::min<long>(config.rollout_length,
                                       config.total_timesteps - timesteps);
    Rollout ro;
    std::vector<double> finished_returns;
    std::vector<double> action_counts(env.num_actions(), 0.0);
    for (long t = 0; t < budget; ++t) {
      const std::vector<double> logits = chain_forward(model.actor, obs);
      const std::vector<double> logp = log_softmax(logits);
      const double u = uniform01(rng);
      std::size_t action = logp.size() - 1;
      double cumulative = 0.0;
      for (std::size_t j = 0; j < logp.size(); ++j) {
        cumulative += std::exp(logp[j]);
        if (u < cumulative) {
          action = j;
          break;
        }
      }
      const double value = mlp_predict(model.critic, obs)[0];
      check_finite(value, "value estimate");
      DiscreteEnv::Step st = env.step(action);
      check_finite(st.reward, "reward");
      ro.observations.push_back(std::move(obs));
      ro.actions.push_back(action);
      ro.log_probs.push_back(logp[action]);
      ro.values.push_back(value);
      ro.rewards.push_back(st.reward);
      ro.dones.push_back(st.done ? 1 : 0);
      action_counts[action] += 1.0;
      episode_return += st.reward;
      if (st.done) {
        finished_returns.push_back(episode_return);
        episode_return = 0.0;
        obs = env.reset();
      } else {
        obs = std::move(st.observation);
      }
    }
    timesteps += budget;
    const double last_value =
        ro.dones.back() ? 0.0 : mlp_predict(model.critic, obs)[0];
    GaeResult gae = compute_gae(ro.rewards, ro.values, ro.dones, last_value,
                                config.gamma, config.gae_lambda);
    normalize_advantages(gae.advantages);

    const std::size_t n = ro.actions.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    double loss_policy = 0.0;
    double loss_value = 0.0;
    double entropy = 0.0;
    int batches = 0;
    const auto mb = static_cast<std::size_t>(config.minibatch_size);
    for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
      shuffle_in_place(order, rng);
      for (std::size_t start = 0; start < n; start += mb) {
        const std::size_t end = std::min(n, start + mb);
        PpoMinibatch batch;
        for (std::size_t i = start; i < end; ++i) {
          const std::size_t k = order[i];
          batch.observations.push_back(ro.observations[k]);
          batch.actions.push_back(ro.actions[k]);
          batch.old_log_probs.push_back(ro.log_probs[k]);
          batch.advantages.push_back(gae.advantages[k]);
          batch.returns.push_back(gae.returns[k]);
        }
        PpoLoss loss = ppo_loss(model, batch, config);
        check_finite(loss.policy_loss, "policy loss");
        check_finite(loss.value_loss, "value loss");
        double norm2 = squared_norm(loss.critic_grads);
        for (const MlpParams& g : loss.actor_grads) norm2 += squared_norm(g);
        const double norm = std::sqrt(norm2);
        check_finite(norm, "gradient norm");
        if (norm > config.max_grad_norm) {
          const double factor = config.max_grad_norm / norm;
          for (MlpParams& g : loss.actor_grads) scale_in_place(g, factor);
          scale_in_place(loss.critic_grads, factor);
        }
        for (std::size_t k = 0; k < model.actor.size(); ++k) {
          adam_step(model.actor[k], loss.actor_grads[k], actor_opt[k]);
        }
        adam_step(model.critic, loss.critic_grads, critic_opt);
        loss_policy += loss.policy_loss;
        loss_value += loss.value_loss;
        entropy += loss.entropy;
        ++batches;
      }
    }
    for (const MlpParams& link : model.actor) {
      if (!all_finite(link)) {
        throw Error(ErrorCode::kDivergedTraining, "non-finite actor weights");
      }
    }

    PpoUpdateLog log;
    log.update = update++;
    log.timesteps = timesteps;
    log.episodes_completed = static_cast<int>(finished_returns.size());
    log.mean_return =
        finished_returns.empty()
            ? episode_return
            : std::accumulate(finished_returns.begin(), finished_returns.end(),
                              0.0) /
                  static_cast<double>(finished_returns.size());
    check_finite(log.mean_return, "mean return");
    log.loss_policy = loss_policy / batches;
    log.loss_value = loss_value / batches;
    log.entropy = entropy / batches;
    for (double& c : action_counts) c /= static_cast<double>(n);
    log.action_rates = std::move(action_counts);
    if (on_update) on_update(log);
  }
}

}  // namespace asknav
