#ifndef ASKNAV_EXPERT_HPP_
#define ASKNAV_EXPERT_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

#include "asknav/nav_env.hpp"

namespace asknav {

enum class IntervenerKind : std::uint8_t { kSimExpert, kNoisyExpert, kLiveHuman };

std::string_view to_string(IntervenerKind kind);
IntervenerKind intervener_from_string(std::string_view text);  // sim, noisy, human

struct InterventionBudget {
  int max_steps_per_request = 25;  // M
};

struct Intervener {
  IntervenerKind kind = IntervenerKind::kSimExpert;
  double noise_rate = 0.2;  // NOISY_EXPERT only

  void validate() const;
};

// Turns and forwards along a shortest 4-connected path to the goal cell,
// ending with STOP. Among equal-length paths the next cell is chosen in
// N, E, S, W order; a reversal is two left turns. Throws Unreachable.
std::vector<Action> shortest_path_actions(const GridMap& map, const Pose& pose,
                                          Cell goal);
// Same plan using a precomputed distance field rooted at the goal.
std::vector<Action> shortest_path_actions(const GridMap& map,
                                          const DistanceField& goal_field,
                                          const Pose& pose);

// Actions for one help request, never more than M. The expert replans from
// the current pose. NOISY_EXPERT replaces each action, with probability
// noise_rate, by a uniformly drawn FORWARD/TURN_LEFT/TURN_RIGHT. LIVE_HUMAN
// cannot be served here (it is driven by the session server) and throws
// InvalidArgument.
std::vector<Action> provide_intervention(const Intervener& intervener,
                                         const GridMap& map,
                                         const EpisodeState& state,
                                         InterventionBudget budget,
                                         std::uint64_t rng_seed);

}  // namespace asknav

#endif  // ASKNAV_EXPERT_HPP_
