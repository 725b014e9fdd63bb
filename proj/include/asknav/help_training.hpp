#ifndef ASKNAV_HELP_TRAINING_HPP_
#define ASKNAV_HELP_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "asknav/agent.hpp"
#include "asknav/expert.hpp"
#include "asknav/help_policy.hpp"
#include "asknav/nav_env.hpp"
#include "asknav/ppo.hpp"
#include "asknav/reward.hpp"
#include "asknav/rng.hpp"
#include "asknav/runner.hpp"

namespace asknav {

struct HelpTrainingConfig {
  RewardConfig reward;
  PpoConfig ppo;
  InterventionBudget budget;
  FeatureVariant variant = FeatureVariant::kAll;
  std::uint64_t seed = 0;
};

nlohmann::json help_training_config_to_json(const HelpTrainingConfig& c);
HelpTrainingConfig help_training_config_from_json(const nlohmann::json& j);

struct HelpTrainingLogEntry {
  int update = 0;
  double mean_return = 0.0;
  double ask_rate = 0.0;
  double loss_policy = 0.0;
  double loss_value = 0.0;
};

nlohmann::json log_entry_to_json(const HelpTrainingLogEntry& e);

// Help decisions as a two-action environment. Each step is one decision
// point: PROCEED runs one agent action, ASK runs the whole intervention and
// then the agent step that must follow before the next request. The reward
// of a step is the help-reward increment it caused, plus the terminal terms
// when the episode ends inside it. Episodes are visited in a reshuffled order
// every pass over the list.
class HelpEnv : public DiscreteEnv {
 public:
  HelpEnv(const MapSet& maps, std::vector<EpisodeSpec> episodes,
          const AgentPolicy& agent, FeatureVariant variant,
          Intervener intervener, InterventionBudget budget, RewardConfig reward,
          std::uint64_t seed);

  std::size_t observation_size() const override { return width_; }
  std::size_t num_actions() const override { return 2; }
  std::vector<double> reset() override;
  Step step(std::size_t action) override;

  const EpisodeDriver* driver() const { return driver_.get(); }

 private:
  double agent_step();
  Step finish_step(double reward);

  const MapSet* maps_;
  std::vector<EpisodeSpec> episodes_;
  const AgentPolicy* agent_;
  FeatureVariant variant_;
  Intervener intervener_;
  InterventionBudget budget_;
  RewardConfig reward_;
  Rng rng_;
  std::size_t width_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::unique_ptr<EpisodeDriver> driver_;
  std::optional<EpisodeDriver::Decision> decision_;
};

struct HelpTrainingResult {
  HelpPolicy policy;
  std::vector<HelpTrainingLogEntry> log;
};

using HelpTrainingCallback = std::function<void(const HelpTrainingLogEntry&)>;

// PPO on the help policy against `intervener` (SIM_EXPERT for training).
// The agent must be frozen and is hash-checked after training.
HelpTrainingResult ppo_train_help(const MapSet& maps,
                                  std::span<const EpisodeSpec> episodes,
                                  const AgentPolicy& agent, HelpPolicy policy,
                                  const HelpTrainingConfig& config,
                                  Intervener intervener = {},
                                  const HelpTrainingCallback& on_update = {});

void write_training_log(std::span<const HelpTrainingLogEntry> log,
                        const std::filesystem::path& path);

}  // namespace asknav

#endif  // ASKNAV_HELP_TRAINING_HPP_
