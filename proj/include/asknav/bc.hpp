#ifndef ASKNAV_BC_HPP_
#define ASKNAV_BC_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "asknav/agent.hpp"
#include "asknav/help_policy.hpp"
#include "asknav/nav_env.hpp"
#include "asknav/trace.hpp"

namespace asknav {

struct LabeledStep {
  int index = 0;  // step index in the source trace
  HelpFeatures features;
  HelpDecision label = HelpDecision::kProceed;
};

// Replays a demonstration and rebuilds the help features the agent saw.
// Operator interrupts become ASK, agent steps PROCEED; the remaining steps of
// each takeover are left out. Throws MalformedTrace when the trace does not
// replay on `map`.
std::vector<LabeledStep> label_demonstration(const EpisodeTrace& trace,
                                             const GridMap& map,
                                             const AgentPolicy& agent,
                                             FeatureVariant variant);

struct BcConfig {
  int epochs = 3;
  double learning_rate = 1e-3;
  int minibatch_size = 32;
  // Loss weight of ASK samples. Empty means the PROCEED:ASK count ratio,
  // which needs at least one ASK label.
  std::optional<double> ask_weight;
  std::uint64_t seed = 0;
};

struct BcResult {
  HelpPolicy policy;
  std::vector<double> epoch_loss;  // mean weighted cross-entropy per epoch
};

// Throws EmptyDataset, NoPositiveLabels (automatic weighting only),
// VariantShapeMismatch and DivergedTraining.
BcResult bc_train(std::span<const LabeledStep> dataset, HelpPolicy policy,
                  const BcConfig& config);

}  // namespace asknav

#endif  // ASKNAV_BC_HPP_
