#ifndef ASKNAV_PPO_HPP_
#define ASKNAV_PPO_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "asknav/nnet.hpp"

namespace asknav {

struct PpoConfig {
  long total_timesteps = 100'000;
  int rollout_length = 1024;
  double clip_epsilon = 0.2;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  int epochs_per_update = 4;
  int minibatch_size = 256;
  double entropy_coeff = 0.01;
  double value_coeff = 0.5;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  std::size_t hidden_width = 64;

  // Throws InvalidArgument when a field is out of range.
  void validate() const;
};

nlohmann::json ppo_config_to_json(const PpoConfig& c);
PpoConfig ppo_config_from_json(const nlohmann::json& j);

// Episodic environment with a discrete action set. Each environment owns its
// randomness, seeded at construction.
class DiscreteEnv {
 public:
  struct Step {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
  };

  virtual ~DiscreteEnv() = default;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual Step step(std::size_t action) = 0;
};

// Policy is a chain of MLPs whose last output is the action logits; the
// critic maps the same observation to one value.
struct ActorCritic {
  std::vector<MlpParams> actor;
  MlpParams critic;
};

// Critic shaped [input, hidden, hidden, 1].
MlpParams make_critic(std::size_t input_size, std::size_t hidden,
                      std::uint64_t seed);

std::vector<double> chain_forward(std::span<const MlpParams> chain,
                                  std::span<const double> input);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// One terminated episode: the value after the last step is zero.
GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values, double gamma,
                      double gae_lambda);

// Rollout form: dones[t] marks that step t ended an episode; `last_value`
// bootstraps the segment still running at the end of the buffer.
GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values,
                      std::span<const std::uint8_t> dones, double last_value,
                      double gamma, double gae_lambda);

// Shifts to zero mean and unit variance; leaves batches of size < 2 centred
// only.
void normalize_advantages(std::vector<double>& advantages);

struct PpoMinibatch {
  std::vector<std::vector<double>> observations;
  std::vector<std::size_t> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct PpoLoss {
  double policy_loss = 0.0;  // clipped surrogate, negated, batch mean
  double value_loss = 0.0;   // 0.5 * mean squared error
  double entropy = 0.0;      // mean policy entropy
  double clip_fraction = 0.0;
  std::vector<MlpParams> actor_grads;  // of policy_loss - entropy_coeff * entropy
  MlpParams critic_grads;              // of value_coeff * value_loss
};

PpoLoss ppo_loss(const ActorCritic& model, const PpoMinibatch& batch,
                 const PpoConfig& config);

struct PpoUpdateLog {
  int update = 0;
  long timesteps = 0;
  int episodes_completed = 0;
  double mean_return = 0.0;
  double loss_policy = 0.0;
  double loss_value = 0.0;
  double entropy = 0.0;
  std::vector<double> action_rates;
};

using PpoCallback = std::function<void(const PpoUpdateLog&)>;

// Trains `model` in place for config.total_timesteps environment decisions.
// Throws DivergedTraining on a non-finite loss, return or parameter.
void ppo_train(DiscreteEnv& env, ActorCritic& model, const PpoConfig& config,
               std::uint64_t seed, const PpoCallback& on_update = {});

}  // namespace asknav

#endif  // ASKNAV_PPO_HPP_
