#include "asknav/reward.hpp"

#include <cmath>

#include "asknav/error.hpp"

namespace asknav {

void RewardConfig::validate() const {
  if (!(lambda_d >= 0.0) || !(lambda_h >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "reward lambdas must be >= 0");
  }
}

nlohmann::json reward_config_to_json(const RewardConfig& c) {
  return {{"lambda_d", c.lambda_d}, {"lambda_h", c.lambda_h}};
}

RewardConfig reward_config_from_json(const nlohmann::json& j) {
  RewardConfig c;
  c.lambda_d = j.value("lambda_d", c.lambda_d);
  c.lambda_h = j.value("lambda_h", c.lambda_h);
  c.validate();
  return c;
}

double help_reward(std::span<const double> r_nav_history, int help_requests,
                   int intervention_path, const RewardConfig& config) {
  if (r_nav_history.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "help_reward needs history");
  }
  if (help_requests < 0 || intervention_path < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative help counters");
  }
  double sum = 0.0;
  for (std::size_t i = 1; i < r_nav_history.size(); ++i) {
    sum += (r_nav_history[i] - r_nav_history[i - 1]) / (1.0 + config.lambda_d);
  }
  const double scale =
      1.0 / (1.0 + static_cast<double>(help_requests) * intervention_path);
  return scale * sum;
}

double total_reward(double r_help, double r_spl, int human_actions,
                    int agent_actions, const RewardConfig& config) {
  if (human_actions + agent_actions <= 0) {
    throw Error(ErrorCode::kZeroSteps, "total_reward with no actions");
  }
  const double ratio = static_cast<double>(human_actions) /
                       static_cast<double>(human_actions + agent_actions);
  return r_help + r_spl - config.lambda_h * ratio;
}

}  // namespace asknav
