#ifndef ASKNAV_RUNNER_HPP_
#define ASKNAV_RUNNER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asknav/agent.hpp"
#include "asknav/expert.hpp"
#include "asknav/help_policy.hpp"
#include "asknav/nav_env.hpp"
#include "asknav/reward.hpp"
#include "asknav/trace.hpp"

namespace asknav {

// One live episode: environment state, help-feature bookkeeping, reward
// increments and the trace. Shared by run_episode, the help-policy training
// environment, demonstration labelling and the session server so all of them
// see identical features and rewards.
struct StepFlags {
  bool help_requested = false;
  bool interrupt = false;
  bool fallback = false;
  std::optional<double> ask_probability;
};

class EpisodeDriver {
 public:
  struct Decision {
    AgentStep agent;
    HelpFeatures features;
    PointGoal pointgoal;
  };


  EpisodeDriver(const GridMap& map, const EpisodeSpec& spec,
                const AgentPolicy& agent, FeatureVariant variant,
                RewardConfig reward = {}, bool record_trace = true);

  // Observes the current pose, runs the frozen agent and assembles the help
  // features.
  Decision prepare_decision() const;

  // Executes one action and returns the increment of the cumulative help
  // reward it caused.
  double execute(Action action, Actor actor, const StepFlags& flags = {});

  // A help request starts an intervention: C_r grows and the since-help
  // counters restart. Returns no reward.
  void begin_intervention();
  // Ends the active intervention (c_p back to 0); returns the resulting
  // change of the cumulative help reward.
  double end_intervention();

  bool intervention_active() const { return intervention_active_; }
  // A new request needs at least one agent step since the last intervention.
  bool can_request_help() const;
  bool terminated() const { return state_.terminated; }

  // r_spl - lambda_h * C_h / (C_h + C_a), paid once at termination.
  double terminal_reward() const;
  double help_reward_now() const { return last_help_reward_; }

  EpisodeResult result() const;
  const EpisodeState& state() const { return state_; }
  const GridMap& map() const { return *map_; }
  const EpisodeSpec& spec() const { return spec_; }
  int steps_since_help() const { return steps_since_help_; }
  int path_cells_since_help() const { return path_cells_since_help_; }

  EpisodeTrace& trace() { return trace_; }
  // Appends the footer; the episode must have terminated.
  EpisodeTrace finish_trace();
  // Streams each record to `writer` as well as the in-memory trace.
  void set_writer(TraceWriter* writer) { writer_ = writer; }

 private:
  const GridMap* map_;
  EpisodeSpec spec_;
  const AgentPolicy* agent_;
  FeatureVariant variant_;
  RewardConfig reward_;
  bool record_trace_;
  EpisodeState state_;
  std::optional<PointGoal> previous_pointgoal_;
  int steps_since_help_ = 0;
  int path_cells_since_help_ = 0;
  bool intervention_active_ = false;
  bool agent_stepped_since_intervention_ = true;
  double progress_sum_ = 0.0;
  double last_help_reward_ = 0.0;
  EpisodeTrace trace_;
  TraceWriter* writer_ = nullptr;
};

enum class GateKind : std::uint8_t { kPolicy, kAlwaysProceed, kAlwaysAsk };

struct HelpGate {
  GateKind kind = GateKind::kAlwaysProceed;
  const HelpPolicy* policy = nullptr;
  DecisionMode mode = DecisionMode::kArgmax;
};

struct RunConfig {
  HelpGate gate;
  Intervener intervener;
  InterventionBudget budget;
  std::uint64_t seed = 0;
  RewardConfig reward;
  std::string agent_id;
  std::string help_policy_id;
  std::string timestamp;
};

// Runs one episode with SIM_EXPERT or NOISY_EXPERT interventions and returns
// its full trace. LIVE_HUMAN episodes go through the session server.
EpisodeTrace run_episode(const GridMap& map, const EpisodeSpec& spec,
                         const AgentPolicy& agent, const RunConfig& config);

// Stand-in for a human demonstrator: watches the agent and takes over when
// the geodesic distance has not improved for `patience` agent steps, driving
// the expert plan for `takeover_steps` actions (at most M) before releasing.
struct DemonstratorConfig {
  int patience = 3;
  int takeover_steps = 10;
  InterventionBudget budget;
};

EpisodeTrace run_scripted_demonstration(const GridMap& map,
                                        const EpisodeSpec& spec,
                                        const AgentPolicy& agent,
                                        const DemonstratorConfig& config,
                                        const std::string& timestamp = {});

std::vector<EpisodeSpec> read_episodes(const std::filesystem::path& path);
void write_episodes(std::span<const EpisodeSpec> episodes,
                    const std::filesystem::path& path);

}  // namespace asknav

#endif  // ASKNAV_RUNNER_HPP_
