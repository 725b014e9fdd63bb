#include "asknav/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "asknav/error.hpp"
#include "asknav/rng.hpp"

namespace asknav {

std::uint64_t AgentPolicy::hash() const {
  std::uint64_t h = params_hash(encoder);
  if (kind == AgentKind::kLearned) h ^= params_hash(head) * 0x9e3779b97f4a7c15ULL;
  return h;
}

namespace {

std::size_t observation_width(const SensorConfig& sensor) {
  if (sensor.num_rays < 4 || sensor.num_rays % 4 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "num_rays must be a multiple of 4");
  }
  return static_cast<std::size_t>(sensor.num_rays) + 2;
}

}  // namespace

AgentPolicy make_scripted_agent(std::uint64_t seed, std::size_t feature_width,
                                SensorConfig sensor) {
  AgentPolicy p;
  p.kind = AgentKind::kScripted;
  p.sensor = sensor;
  p.encoder = init_mlp({observation_width(sensor), feature_width, feature_width},
                       mix_seed(seed, 1));
  p.frozen = true;
  return p;
}

AgentPolicy make_learned_agent(std::uint64_t seed, std::size_t feature_width,
                               SensorConfig sensor) {
  AgentPolicy p;
  p.kind = AgentKind::kLearned;
  p.sensor = sensor;
  p.encoder = init_mlp({observation_width(sensor), feature_width, feature_width},
                       mix_seed(seed, 1));
  p.head = init_mlp({feature_width, feature_width, kNumActions}, mix_seed(seed, 2));
  return p;
}

Action scripted_action(const Observation& obs) {
  constexpr double kQuarter = std::numbers::pi / 4.0;
  const double cell = obs.cell_size;
  if (obs.distance_to_goal < 1.9 * cell) return Action::kStop;

  const std::size_t n = obs.rays.size();
  auto clear = [&](std::size_t ray) { return obs.rays[ray] > 1.5 * cell; };
  const std::size_t front = 0;
  const std::size_t left = n / 4;
  const std::size_t right = 3 * n / 4;
  const double rel = obs.relative_heading;

  if (std::abs(rel) <= kQuarter) {
    if (clear(front)) return Action::kForward;
    return obs.rays[right] > obs.rays[left] ? Action::kTurnRight
                                            : Action::kTurnLeft;
  }
  const bool goal_left = rel > 0.0;
  if (std::abs(rel) > 3.0 * kQuarter) {
    return goal_left ? Action::kTurnLeft : Action::kTurnRight;
  }
  if (clear(goal_left ? left : right)) {
    return goal_left ? Action::kTurnLeft : Action::kTurnRight;
  }
  if (clear(front)) return Action::kForward;
  return goal_left ? Action::kTurnRight : Action::kTurnLeft;
}

AgentStep agent_act(const AgentPolicy& policy, const Observation& obs) {
  AgentStep out;
  const std::vector<double> input = obs.as_vector();
  out.features = mlp_predict(policy.encoder, input);
  if (policy.kind == AgentKind::kScripted) {
    out.action = scripted_action(obs);
  } else {
    const std::vector<double> logits = mlp_predict(policy.head, out.features);
    const auto best = std::max_element(logits.begin(), logits.end());
    out.action = static_cast<Action>(best - logits.begin());
  }
  return out;
}

namespace {

class PretrainEnv final : public DiscreteEnv {
 public:
  PretrainEnv(std::span<const GridMap> maps, const PretrainConfig& config,
              SensorConfig sensor)
      : maps_(maps), config_(config), sensor_(sensor), rng_(mix_seed(config.seed, 7)) {}

  std::size_t observation_size() const override {
    return static_cast<std::size_t>(sensor_.num_rays) + 2;
  }
  std::size_t num_actions() const override { return kNumActions; }

  std::vector<double> reset() override {
    map_ = &maps_[uniform_index(rng_, maps_.size())];
    EpisodeSpec spec = sample_episode(*map_, rng_(), config_.min_geodesic,
                                      config_.episode_max_steps);
    state_ = start_episode(*map_, spec);
    return observe(*map_, state_.pose, state_.goal, sensor_).as_vector();
  }

  Step step(std::size_t action) override {
    const double before = state_.distance_to_goal();
    asknav::step(*map_, state_, static_cast<Action>(action), Actor::kAgent);
    Step out;
    out.reward = (before - state_.distance_to_goal()) / map_->cell_size() -
                 config_.slack_penalty;
    if (state_.terminated) {
      out.done = true;
      if (is_success(state_)) out.reward += config_.success_bonus;
      return out;
    }
    out.observation = observe(*map_, state_.pose, state_.goal, sensor_).as_vector();
    return out;
  }

 private:
  std::span<const GridMap> maps_;
  PretrainConfig config_;
  SensorConfig sensor_;
  Rng rng_;
  const GridMap* map_ = nullptr;
  EpisodeState state_;
};

}  // namespace

AgentPolicy pretrain_agent(std::span<const GridMap> maps,
                           const PretrainConfig& config,
                           const PpoCallback& on_update) {
  if (maps.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "pretrain_agent needs >= 1 map");
  }
  AgentPolicy policy = make_learned_agent(config.seed);
  PpoConfig ppo = config.ppo;
  ppo.total_timesteps = config.steps;
  if (config.steps > 0) {
    PretrainEnv env(maps, config, policy.sensor);
    ActorCritic model;
    model.actor = {policy.encoder, policy.head};
    model.critic = make_critic(env.observation_size(), ppo.hidden_width,
                               mix_seed(config.seed, 3));
    ppo_train(env, model, ppo, config.seed, on_update);
    policy.encoder = std::move(model.actor[0]);
    policy.head = std::move(model.actor[1]);
  }
  policy.frozen = true;
  return policy;
}

nlohmann::json agent_to_json(const AgentPolicy& policy) {
  nlohmann::json j;
  j["format_version"] = kWeightFormatVersion;
  j["kind"] = policy.kind == AgentKind::kScripted ? "SCRIPTED" : "LEARNED";
  j["frozen"] = policy.frozen;
  j["sensor"] = {{"num_rays", policy.sensor.num_rays},
                 {"max_range_cells", policy.sensor.max_range_cells}};
  j["encoder"] = mlp_to_json(policy.encoder);
  if (policy.kind == AgentKind::kLearned) j["head"] = mlp_to_json(policy.head);
  return j;
}

AgentPolicy agent_from_json(const nlohmann::json& j) {
  try {
    AgentPolicy p;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "SCRIPTED") {
      p.kind = AgentKind::kScripted;
    } else if (kind == "LEARNED") {
      p.kind = AgentKind::kLearned;
    } else {
      throw Error(ErrorCode::kShapeMismatch, "unknown agent kind " + kind);
    }
    p.frozen = j.value("frozen", true);
    p.sensor.num_rays = j.at("sensor").at("num_rays").get<int>();
    p.sensor.max_range_cells = j.at("sensor").at("max_range_cells").get<int>();
    p.encoder = mlp_from_json(j.at("encoder"));
    if (p.encoder.input_size() != observation_width(p.sensor)) {
      throw Error(ErrorCode::kShapeMismatch, "encoder input does not match sensor");
    }
    if (p.kind == AgentKind::kLearned) {
      p.head = mlp_from_json(j.at("head"));
      if (p.head.input_size() != p.encoder.output_size() ||
          p.head.output_size() != kNumActions) {
        throw Error(ErrorCode::kShapeMismatch, "agent head shape");
      }
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kShapeMismatch, std::string("bad agent json: ") + e.what());
  }
}

void save_agent(const AgentPolicy& policy, const std::filesystem::path& path) {
  write_file_atomic(path, agent_to_json(policy).dump(1) + "\n");
}

AgentPolicy load_agent(const std::filesystem::path& path) {
  return agent_from_json(read_json_file(path));
}

}  // namespace asknav
