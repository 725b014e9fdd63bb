#include "asknav/help_training.hpp"

#include <numeric>

#include "asknav/error.hpp"
#include "asknav/nnet.hpp"

namespace asknav {

nlohmann::json help_training_config_to_json(const HelpTrainingConfig& c) {
  return {{"reward", reward_config_to_json(c.reward)},
          {"ppo", ppo_config_to_json(c.ppo)},
          {"budget", {{"max_steps_per_request", c.budget.max_steps_per_request}}},
          {"variant", std::string(to_string(c.variant))},
          {"seed", c.seed}};
}

HelpTrainingConfig help_training_config_from_json(const nlohmann::json& j) {
  HelpTrainingConfig c;
  try {
    if (j.contains("reward")) c.reward = reward_config_from_json(j.at("reward"));
    if (j.contains("ppo")) c.ppo = ppo_config_from_json(j.at("ppo"));
    if (j.contains("budget")) {
      c.budget.max_steps_per_request =
          j.at("budget").value("max_steps_per_request", c.budget.max_steps_per_request);
    }
    if (j.contains("variant")) {
      c.variant = variant_from_string(j.at("variant").get<std::string>());
    }
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("training config: ") + e.what());
  }
  if (c.budget.max_steps_per_request < 1) {
    throw Error(ErrorCode::kInvalidArgument, "budget must be at least 1");
  }
  return c;
}

nlohmann::json log_entry_to_json(const HelpTrainingLogEntry& e) {
  return {{"update", e.update},
          {"mean_return", e.mean_return},
          {"ask_rate", e.ask_rate},
          {"loss_policy", e.loss_policy},
          {"loss_value", e.loss_value}};
}

HelpEnv::HelpEnv(const MapSet& maps, std::vector<EpisodeSpec> episodes,
                 const AgentPolicy& agent, FeatureVariant variant,
                 Intervener intervener, InterventionBudget budget,
                 RewardConfig reward, std::uint64_t seed)
    : maps_(&maps),
      episodes_(std::move(episodes)),
      agent_(&agent),
      variant_(variant),
      intervener_(intervener),
      budget_(budget),
      reward_(reward),
      rng_(seed),
      width_(help_input_width(variant, agent.feature_width())) {
  if (episodes_.empty()) throw Error(ErrorCode::kInvalidArgument, "no training episodes");
  if (intervener_.kind == IntervenerKind::kLiveHuman) {
    throw Error(ErrorCode::kInvalidArgument, "training needs a simulated intervener");
  }
  intervener_.validate();
  for (const EpisodeSpec& e : episodes_) find_map(maps, e.map_id);
  order_.resize(episodes_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  cursor_ = order_.size();
}

std::vector<double> HelpEnv::reset() {
  if (cursor_ >= order_.size()) {
    shuffle_in_place(order_, rng_);
    cursor_ = 0;
  }
  const EpisodeSpec& spec = episodes_[order_[cursor_++]];
  driver_ = std::make_unique<EpisodeDriver>(find_map(*maps_, spec.map_id), spec,
                                            *agent_, variant_, reward_, false);
  return driver_->prepare_decision().features.values;
}

double HelpEnv::agent_step() {
  const EpisodeDriver::Decision d = driver_->prepare_decision();
  return driver_->execute(d.agent.action, Actor::kAgent);
}

DiscreteEnv::Step HelpEnv::finish_step(double reward) {
  Step s;
  if (driver_->terminated()) {
    s.reward = reward + driver_->terminal_reward();
    s.done = true;
    s.observation.assign(width_, 0.0);
    return s;
  }
  s.reward = reward;
  s.observation = driver_->prepare_decision().features.values;
  return s;
}

DiscreteEnv::Step HelpEnv::step(std::size_t action) {
  if (!driver_ || driver_->terminated()) {
    throw Error(ErrorCode::kEpisodeTerminated, "reset before stepping");
  }
  double reward = 0.0;
  if (action == static_cast<std::size_t>(HelpDecision::kAsk)) {
    driver_->begin_intervention();
    const std::vector<Action> actions = provide_intervention(
        intervener_, driver_->map(), driver_->state(), budget_, rng_());
    for (std::size_t i = 0; i < actions.size() && !driver_->terminated(); ++i) {
      StepFlags flags;
      flags.help_requested = i == 0;
      reward += driver_->execute(actions[i], Actor::kExpert, flags);
    }
    if (!driver_->terminated()) reward += driver_->end_intervention();
  }
  if (!driver_->terminated()) reward += agent_step();
  return finish_step(reward);
}

HelpTrainingResult ppo_train_help(const MapSet& maps,
                                  std::span<const EpisodeSpec> episodes,
                                  const AgentPolicy& agent, HelpPolicy policy,
                                  const HelpTrainingConfig& config,
                                  Intervener intervener,
                                  const HelpTrainingCallback& on_update) {
  if (!agent.frozen) {
    throw Error(ErrorCode::kFrozenViolation, "help training needs a frozen agent");
  }
  if (policy.variant != config.variant) {
    throw Error(ErrorCode::kVariantShapeMismatch,
                "policy variant " + std::string(to_string(policy.variant)) +
                    " differs from configured " + std::string(to_string(config.variant)));
  }
  const std::size_t width = help_input_width(policy.variant, agent.feature_width());
  if (policy.net.input_size() != width || policy.net.output_size() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "help network does not fit the features");
  }
  config.ppo.validate();
  const std::uint64_t agent_hash = agent.hash();

  HelpEnv env(maps, std::vector<EpisodeSpec>(episodes.begin(), episodes.end()),
              agent, policy.variant, intervener, config.budget, config.reward,
              mix_seed(config.seed, 2));
  ActorCritic model{{policy.net},
                    make_critic(width, config.ppo.hidden_width, mix_seed(config.seed, 1))};
  HelpTrainingResult out;
  ppo_train(env, model, config.ppo, config.seed, [&](const PpoUpdateLog& u) {
    HelpTrainingLogEntry e{u.update, u.mean_return,
                           u.action_rates.size() > 1 ? u.action_rates[1] : 0.0,
                           u.loss_policy, u.loss_value};
    out.log.push_back(e);
    if (on_update) on_update(e);
  });
  if (agent.hash() != agent_hash) {
    throw Error(ErrorCode::kFrozenViolation, "agent weights changed during training");
  }
  policy.net = std::move(model.actor.front());
  out.policy = std::move(policy);
  return out;
}

void write_training_log(std::span<const HelpTrainingLogEntry> log,
                        const std::filesystem::path& path) {
  std::string text;
  for (const HelpTrainingLogEntry& e : log) text += log_entry_to_json(e).dump() + "\n";
  write_file_atomic(path, text);
}

}  // namespace asknav
