#ifndef ASKNAV_HELP_POLICY_HPP_
#define ASKNAV_HELP_POLICY_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "asknav/nav_env.hpp"
#include "asknav/nnet.hpp"

namespace asknav {

enum class FeatureVariant : std::uint8_t { kEncoder, kPointPath, kAll };
enum class HelpDecision : std::uint8_t { kProceed = 0, kAsk = 1 };
enum class DecisionMode : std::uint8_t { kSample, kArgmax };

std::string_view to_string(FeatureVariant variant);
FeatureVariant variant_from_string(std::string_view text);  // "encoder", "point_path", "all"

using PointGoal = GoalBearing;

// Layouts:
//   ENCODER    [encoder features]
//   POINT_PATH [distance change, relative heading, path since help]
//   ALL        [encoder features, distance change, relative heading,
//               path since help, time since help]
struct HelpFeatures {
  FeatureVariant variant = FeatureVariant::kAll;
  std::vector<double> values;
};

std::size_t help_input_width(FeatureVariant variant, std::size_t encoder_width);

// `previous` is empty on the first step of an episode, giving a zero distance
// change. Path and time since the last help request are divided by max_steps
// and clamped to [0, 1].
HelpFeatures assemble_features(FeatureVariant variant,
                               std::span<const double> encoder_features,
                               PointGoal now, std::optional<PointGoal> previous,
                               int steps_since_help, int path_cells_since_help,
                               int max_steps);

struct HelpPolicy {
  MlpParams net;  // [input, 64, 64, 2]; logits are (PROCEED, ASK)
  FeatureVariant variant = FeatureVariant::kAll;
  double ask_threshold = 0.5;
};

HelpPolicy make_help_policy(FeatureVariant variant, std::uint64_t seed,
                            std::size_t encoder_width = 64,
                            std::size_t hidden_width = 64);

struct HelpChoice {
  HelpDecision decision = HelpDecision::kProceed;
  double ask_probability = 0.0;
};

double ask_probability(const HelpPolicy& policy, const HelpFeatures& features);

// SAMPLE draws from the policy with a stream seeded by rng_seed; ARGMAX asks
// iff the ask probability exceeds ask_threshold and ignores the seed.
HelpChoice decide_help(const HelpPolicy& policy, const HelpFeatures& features,
                       DecisionMode mode, std::uint64_t rng_seed);

nlohmann::json help_policy_to_json(const HelpPolicy& policy);
HelpPolicy help_policy_from_json(const nlohmann::json& j);
void save_help_policy(const HelpPolicy& policy, const std::filesystem::path& path);
HelpPolicy load_help_policy(const std::filesystem::path& path);

}  // namespace asknav

#endif  // ASKNAV_HELP_POLICY_HPP_
