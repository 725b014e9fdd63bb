#include "asknav/expert.hpp"

#include <algorithm>

#include "asknav/error.hpp"
#include "asknav/rng.hpp"

namespace asknav {

std::string_view to_string(IntervenerKind kind) {
  switch (kind) {
    case IntervenerKind::kSimExpert: return "SIM_EXPERT";
    case IntervenerKind::kNoisyExpert: return "NOISY_EXPERT";
    case IntervenerKind::kLiveHuman: return "LIVE_HUMAN";
  }
  return "?";
}

IntervenerKind intervener_from_string(std::string_view text) {
  if (text == "sim" || text == "SIM_EXPERT") return IntervenerKind::kSimExpert;
  if (text == "noisy" || text == "NOISY_EXPERT") return IntervenerKind::kNoisyExpert;
  if (text == "human" || text == "LIVE_HUMAN") return IntervenerKind::kLiveHuman;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown intervener '" + std::string(text) + "'");
}

void Intervener::validate() const {
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise_rate must be in [0, 1)");
  }
}

std::vector<Action> shortest_path_actions(const GridMap& map,
                                          const DistanceField& goal_field,
                                          const Pose& pose) {
  if (!goal_field.reachable(pose.cell())) {
    throw Error(ErrorCode::kUnreachable, "goal unreachable from pose");
  }
  std::vector<Action> actions;
  Pose cur = pose;
  int remaining = goal_field.steps(cur.cell());
  while (remaining > 0) {
    Heading next_heading = cur.heading;
    for (Heading h : {Heading::kNorth, Heading::kEast, Heading::kSouth,
                      Heading::kWest}) {
      const Cell n = advance(cur.cell(), h);
      if (map.is_free(n) && goal_field.steps(n) == remaining - 1) {
        next_heading = h;
        break;
      }
    }
    if (next_heading == turn_left(cur.heading)) {
      actions.push_back(Action::kTurnLeft);
    } else if (next_heading == turn_right(cur.heading)) {
      actions.push_back(Action::kTurnRight);
    } else if (next_heading != cur.heading) {
      actions.push_back(Action::kTurnLeft);
      actions.push_back(Action::kTurnLeft);
    }
    cur.heading = next_heading;
    actions.push_back(Action::kForward);
    const Cell n = advance(cur.cell(), cur.heading);
    cur.x = n.x;
    cur.y = n.y;
    --remaining;
  }
  actions.push_back(Action::kStop);
  return actions;
}

std::vector<Action> shortest_path_actions(const GridMap& map, const Pose& pose,
                                          Cell goal) {
  if (!map.is_free(pose.cell()) || !map.is_free(goal)) {
    throw Error(ErrorCode::kBlockedEndpoint, "pose or goal blocked");
  }
  return shortest_path_actions(map, DistanceField(map, goal), pose);
}

std::vector<Action> provide_intervention(const Intervener& intervener,
                                         const GridMap& map,
                                         const EpisodeState& state,
                                         InterventionBudget budget,
                                         std::uint64_t rng_seed) {
  intervener.validate();
  if (budget.max_steps_per_request < 1) {
    throw Error(ErrorCode::kInvalidArgument, "budget M must be >= 1");
  }
  if (intervener.kind == IntervenerKind::kLiveHuman) {
    throw Error(ErrorCode::kInvalidArgument,
                "live human interventions are served by the session server");
  }
  std::vector<Action> plan =
      state.goal_field ? shortest_path_actions(map, *state.goal_field, state.pose)
                       : shortest_path_actions(map, state.pose, state.goal);
  if (plan.size() > static_cast<std::size_t>(budget.max_steps_per_request)) {
    plan.resize(static_cast<std::size_t>(budget.max_steps_per_request));
  }
  if (intervener.kind == IntervenerKind::kNoisyExpert && intervener.noise_rate > 0.0) {
    Rng rng(rng_seed);
    constexpr Action kNoise[] = {Action::kForward, Action::kTurnLeft,
                                 Action::kTurnRight};
    for (Action& a : plan) {
      const bool substitute = uniform01(rng) < intervener.noise_rate;
      const Action replacement = kNoise[uniform_index(rng, 3)];
      if (substitute) a = replacement;
    }
  }
  return plan;
}

}  // namespace asknav
