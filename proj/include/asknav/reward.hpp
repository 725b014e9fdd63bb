#ifndef ASKNAV_REWARD_HPP_
#define ASKNAV_REWARD_HPP_

#include <span>

#include <json.hpp>

namespace asknav {

struct RewardConfig {
  double lambda_d = 0.99;  // constant divisor of each progress term
  double lambda_h = 0.5;   // weight of the human action ratio

  void validate() const;
};

nlohmann::json reward_config_to_json(const RewardConfig& c);
RewardConfig reward_config_from_json(const nlohmann::json& j);

// Cumulative help reward at the last entry of `r_nav_history`:
//
//   1 / (1 + C_r * c_p) * sum_i (r_nav[i] - r_nav[i-1]) / (1 + lambda_d)
//
// The first entry has no predecessor and contributes zero. r_nav is the
// negated geodesic distance to the goal.
double help_reward(std::span<const double> r_nav_history, int help_requests,
                   int intervention_path, const RewardConfig& config);

// r_help + r_spl - lambda_h * C_h / (C_h + C_a). Throws ZeroSteps when no
// action was taken.
double total_reward(double r_help, double r_spl, int human_actions,
                    int agent_actions, const RewardConfig& config);

}  // namespace asknav

#endif  // ASKNAV_REWARD_HPP_
