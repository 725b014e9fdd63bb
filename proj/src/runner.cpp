#include "asknav/runner.hpp"

#include <fstream>
#include <sstream>

#include "asknav/error.hpp"
#include "asknav/metrics.hpp"
#include "asknav/nnet.hpp"
#include "asknav/rng.hpp"

namespace asknav {

EpisodeDriver::EpisodeDriver(const GridMap& map, const EpisodeSpec& spec,
                             const AgentPolicy& agent, FeatureVariant variant,
                             RewardConfig reward, bool record_trace)
    : map_(&map),
      spec_(spec),
      agent_(&agent),
      variant_(variant),
      reward_(reward),
      record_trace_(record_trace),
      state_(start_episode(map, spec)) {
  reward_.validate();
  trace_.header.spec = spec;
}

EpisodeDriver::Decision EpisodeDriver::prepare_decision() const {
  const Observation obs = observe(*map_, state_.pose, state_.goal, agent_->sensor);
  Decision d;
  d.agent = agent_act(*agent_, obs);
  d.pointgoal = {obs.distance_to_goal, obs.relative_heading};
  d.features = assemble_features(variant_, d.agent.features, d.pointgoal,
                                 previous_pointgoal_, steps_since_help_,
                                 path_cells_since_help_, state_.max_steps);
  return d;
}

double EpisodeDriver::execute(Action action, Actor actor, const StepFlags& flags) {
  if (actor != Actor::kAgent && !intervention_active_) {
    throw Error(ErrorCode::kInvalidArgument,
                "non-agent action outside an intervention");
  }
  if (actor == Actor::kAgent && intervention_active_) {
    throw Error(ErrorCode::kInvalidArgument, "agent action during an intervention");
  }
  const Pose before = state_.pose;
  const double distance_before = state_.distance_to_goal();
  previous_pointgoal_ = goal_bearing(*map_, before, state_.goal);

  const StepResult moved = step(*map_, state_, action, actor);
  if (actor == Actor::kAgent) {
    agent_stepped_since_intervention_ = true;
  } else {
    ++state_.intervention_path;
  }
  ++steps_since_help_;
  if (moved.moved) ++path_cells_since_help_;

  const double r_nav_before = -distance_before;
  const double r_nav_after = -state_.distance_to_goal();
  progress_sum_ += (r_nav_after - r_nav_before) / (1.0 + reward_.lambda_d);
  const double scale =
      1.0 / (1.0 + static_cast<double>(state_.help_requests) * state_.intervention_path);
  const double current = scale * progress_sum_;
  const double increment = current - last_help_reward_;
  last_help_reward_ = current;

  if (record_trace_) {
    StepRecord r;
    r.index = static_cast<int>(trace_.steps.size());
    r.pose_before = before;
    r.action = action;
    r.actor = actor;
    r.help_requested = flags.help_requested;
    r.interrupt = flags.interrupt;
    r.fallback = flags.fallback;
    r.distance_to_goal = distance_before;
    r.ask_probability = flags.ask_probability;
    if (writer_ != nullptr) writer_->append(r);
    append_step(trace_, std::move(r));
  }
  return increment;
}

void EpisodeDriver::begin_intervention() {
  if (intervention_active_) {
    throw Error(ErrorCode::kInvalidArgument, "intervention already active");
  }
  if (state_.terminated) {
    throw Error(ErrorCode::kEpisodeTerminated, "help request after termination");
  }
  ++state_.help_requests;
  state_.intervention_path = 0;
  steps_since_help_ = 0;
  path_cells_since_help_ = 0;
  intervention_active_ = true;
  agent_stepped_since_intervention_ = false;
}

double EpisodeDriver::end_intervention() {
  if (!intervention_active_) return 0.0;
  intervention_active_ = false;
  state_.intervention_path = 0;
  const double current = progress_sum_;
  const double increment = current - last_help_reward_;
  last_help_reward_ = current;
  return increment;
}

bool EpisodeDriver::can_request_help() const {
  return !state_.terminated && !intervention_active_ &&
         agent_stepped_since_intervention_;
}

double EpisodeDriver::terminal_reward() const {
  const double r_spl =
      spl(is_success(state_), spec_.shortest_path_length, state_.path_length);
  return total_reward(0.0, r_spl, state_.human_actions, state_.agent_actions, reward_);
}

EpisodeResult EpisodeDriver::result() const {
  return make_result(is_success(state_), spec_.shortest_path_length,
                     state_.path_length, state_.human_actions,
                     state_.agent_actions, state_.help_requests);
}

EpisodeTrace EpisodeDriver::finish_trace() {
  if (!state_.terminated) {
    throw Error(ErrorCode::kInvalidArgument, "episode has not terminated");
  }
  TraceFooter footer{state_.stopped ? "STOPPED" : "TIMEOUT", result()};
  if (writer_ != nullptr) writer_->finish(footer);
  trace_.footer = footer;
  return trace_;
}

EpisodeTrace run_episode(const GridMap& map, const EpisodeSpec& spec,
                         const AgentPolicy& agent, const RunConfig& config) {
  if (!agent.frozen) {
    throw Error(ErrorCode::kFrozenViolation, "episodes run with a frozen agent only");
  }
  if (config.gate.kind == GateKind::kPolicy && config.gate.policy == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "policy gate without a policy");
  }
  const FeatureVariant variant = config.gate.kind == GateKind::kPolicy
                                     ? config.gate.policy->variant
                                     : FeatureVariant::kAll;
  EpisodeDriver driver(map, spec, agent, variant, config.reward);
  TraceHeader& header = driver.trace().header;
  header.agent_id = config.agent_id;
  header.help_policy_id = config.help_policy_id;
  header.budget = config.budget.max_steps_per_request;
  header.intervener = config.intervener.kind;
  header.timestamp = config.timestamp;

  std::uint64_t request = 0;
  while (!driver.terminated()) {
    const EpisodeDriver::Decision d = driver.prepare_decision();
    HelpDecision decision = HelpDecision::kProceed;
    std::optional<double> probability;
    if (driver.can_request_help()) {
      switch (config.gate.kind) {
        case GateKind::kPolicy: {
          const HelpChoice choice =
              decide_help(*config.gate.policy, d.features, config.gate.mode,
                          mix_seed(config.seed, static_cast<std::uint64_t>(
                                                    driver.state().steps)));
          decision = choice.decision;
          probability = choice.ask_probability;
          break;
        }
        case GateKind::kAlwaysAsk:
          decision = HelpDecision::kAsk;
          break;
        case GateKind::kAlwaysProceed:
          break;
      }
    }
    if (decision == HelpDecision::kProceed) {
      driver.execute(d.agent.action, Actor::kAgent, {.ask_probability = probability});
      continue;
    }
    driver.begin_intervention();
    const std::vector<Action> actions = provide_intervention(
        config.intervener, map, driver.state(), config.budget,
        mix_seed(config.seed ^ 0x1e7e2u, request++));
    for (std::size_t i = 0; i < actions.size() && !driver.terminated(); ++i) {
      StepFlags flags;
      flags.help_requested = i == 0;
      driver.execute(actions[i], Actor::kExpert, flags);
    }
    if (!driver.terminated()) driver.end_intervention();
  }
  return driver.finish_trace();
}

EpisodeTrace run_scripted_demonstration(const GridMap& map, const EpisodeSpec& spec,
                                        const AgentPolicy& agent,
                                        const DemonstratorConfig& config,
                                        const std::string& timestamp) {
  EpisodeDriver driver(map, spec, agent, FeatureVariant::kAll);
  TraceHeader& header = driver.trace().header;
  header.agent_id = "scripted";
  header.help_policy_id = "scripted-demonstrator";
  header.budget = config.budget.max_steps_per_request;
  header.intervener = IntervenerKind::kSimExpert;
  header.mode = "demonstration";
  header.timestamp = timestamp;

  const int takeover =
      std::min(config.takeover_steps, config.budget.max_steps_per_request);
  double best = driver.state().distance_to_goal();
  int stalled = 0;
  while (!driver.terminated()) {
    if (stalled >= config.patience && driver.can_request_help()) {
      driver.begin_intervention();
      const std::vector<Action> actions = provide_intervention(
          Intervener{IntervenerKind::kSimExpert, 0.0}, map, driver.state(),
          InterventionBudget{takeover}, 0);
      for (std::size_t i = 0; i < actions.size() && !driver.terminated(); ++i) {
        StepFlags flags;
        flags.interrupt = i == 0;
        driver.execute(actions[i], Actor::kHuman, flags);
      }
      if (!driver.terminated()) driver.end_intervention();
      best = driver.state().distance_to_goal();
      stalled = 0;
      continue;
    }
    const EpisodeDriver::Decision d = driver.prepare_decision();
    driver.execute(d.agent.action, Actor::kAgent);
    const double now = driver.state().distance_to_goal();
    if (now < best) {
      best = now;
      stalled = 0;
    } else {
      ++stalled;
    }
  }
  return driver.finish_trace();
}

std::vector<EpisodeSpec> read_episodes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<EpisodeSpec> episodes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      episodes.push_back(spec_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) +
                                      ": " + e.what());
    }
  }
  return episodes;
}

void write_episodes(std::span<const EpisodeSpec> episodes,
                    const std::filesystem::path& path) {
  std::string text;
  for (const EpisodeSpec& e : episodes) text += spec_to_json(e).dump() + "\n";
  write_file_atomic(path, text);
}

}  // namespace asknav
