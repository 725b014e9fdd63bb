#ifndef ASKNAV_AGENT_HPP_
#define ASKNAV_AGENT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "asknav/nav_env.hpp"
#include "asknav/nnet.hpp"
#include "asknav/ppo.hpp"

namespace asknav {

enum class AgentKind : std::uint8_t { kScripted, kLearned };

inline constexpr std::size_t kDefaultFeatureWidth = 64;

// The frozen navigation agent. Both kinds run `encoder` on every observation
// so the help policy always receives the shared features.
struct AgentPolicy {
  AgentKind kind = AgentKind::kScripted;
  SensorConfig sensor;
  MlpParams encoder;  // [rays + 2, width, width]
  MlpParams head;     // [width, width, 4], learned agents only
  bool frozen = false;

  std::size_t feature_width() const { return encoder.output_size(); }
  std::uint64_t hash() const;
};

AgentPolicy make_scripted_agent(std::uint64_t seed,
                                std::size_t feature_width = kDefaultFeatureWidth,
                                SensorConfig sensor = {});
AgentPolicy make_learned_agent(std::uint64_t seed,
                               std::size_t feature_width = kDefaultFeatureWidth,
                               SensorConfig sensor = {});

// Greedy bearing controller with local sensing, in priority order:
//   1. goal within two cells: STOP
//   2. goal within 45 degrees ahead: FORWARD if the front cell is free,
//      otherwise turn toward the longer side ray (ties turn left)
//   3. goal more than 135 degrees off: turn toward its side (left at pi)
//   4. goal to one side: turn toward it if that side is free, else FORWARD
//      along the wall, else turn away.
Action scripted_action(const Observation& obs);

struct AgentStep {
  Action action = Action::kStop;
  std::vector<double> features;
};

// Deterministic: learned agents act by argmax over head logits.
AgentStep agent_act(const AgentPolicy& policy, const Observation& obs);

struct PretrainConfig {
  long steps = 50'000;
  double min_geodesic = 0.3;
  int episode_max_steps = 150;
  double success_bonus = 2.5;
  double slack_penalty = 0.01;
  std::uint64_t seed = 0;
  PpoConfig ppo = [] {
    PpoConfig c;
    c.learning_rate = 1e-3;
    return c;
  }();
};

// PPO on the dense progress reward (geodesic decrease, in cells) plus a
// success bonus on a successful STOP. Returns a frozen learned agent.
AgentPolicy pretrain_agent(std::span<const GridMap> maps,
                           const PretrainConfig& config,
                           const PpoCallback& on_update = {});

nlohmann::json agent_to_json(const AgentPolicy& policy);
AgentPolicy agent_from_json(const nlohmann::json& j);
void save_agent(const AgentPolicy& policy, const std::filesystem::path& path);
AgentPolicy load_agent(const std::filesystem::path& path);

}  // namespace asknav

#endif  // ASKNAV_AGENT_HPP_
