#include "asknav/bc.hpp"

#include <cmath>
#include <numeric>

#include "asknav/error.hpp"
#include "asknav/nnet.hpp"
#include "asknav/rng.hpp"
#include "asknav/runner.hpp"

namespace asknav {

std::vector<LabeledStep> label_demonstration(const EpisodeTrace& trace,
                                             const GridMap& map,
                                             const AgentPolicy& agent,
                                             FeatureVariant variant) {
  const EpisodeSpec& spec = trace.header.spec;
  if (spec.map_id != map.map_id()) {
    throw Error(ErrorCode::kMalformedTrace,
                "trace map " + spec.map_id + " but got " + map.map_id());
  }
  std::vector<LabeledStep> out;
  try {
    EpisodeDriver driver(map, spec, agent, variant, {}, false);
    for (const StepRecord& r : trace.steps) {
      if (driver.terminated()) {
        throw Error(ErrorCode::kMalformedTrace, "steps after termination");
      }
      if (driver.state().pose != r.pose_before) {
        throw Error(ErrorCode::kMalformedTrace,
                    "pose mismatch at step " + std::to_string(r.index));
      }
      if (r.actor == Actor::kAgent) {
        if (r.interrupt || r.help_requested) {
          throw Error(ErrorCode::kMalformedTrace,
                      "agent step flagged as takeover at " + std::to_string(r.index));
        }
        driver.end_intervention();
        out.push_back({r.index, driver.prepare_decision().features,
                       HelpDecision::kProceed});
        driver.execute(r.action, r.actor);
        continue;
      }
      if (r.interrupt || r.help_requested) {
        driver.end_intervention();
        if (r.interrupt) {
          out.push_back({r.index, driver.prepare_decision().features,
                         HelpDecision::kAsk});
        }
        driver.begin_intervention();
      } else if (!driver.intervention_active()) {
        throw Error(ErrorCode::kMalformedTrace,
                    "operator step without a takeover at " + std::to_string(r.index));
      }
      driver.execute(r.action, r.actor);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedTrace) throw;
    throw Error(ErrorCode::kMalformedTrace, e.what());
  }
  return out;
}

BcResult bc_train(std::span<const LabeledStep> dataset, HelpPolicy policy,
                  const BcConfig& config) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no labelled steps");
  if (config.epochs < 0 || config.minibatch_size < 1 || !(config.learning_rate > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad BC settings");
  }
  std::size_t asks = 0;
  for (const LabeledStep& s : dataset) {
    if (s.features.variant != policy.variant ||
        s.features.values.size() != policy.net.input_size()) {
      throw Error(ErrorCode::kVariantShapeMismatch,
                  "dataset features do not match the policy variant");
    }
    if (s.label == HelpDecision::kAsk) ++asks;
  }
  double ask_weight = 1.0;
  if (config.ask_weight) {
    ask_weight = *config.ask_weight;
  } else {
    if (asks == 0) throw Error(ErrorCode::kNoPositiveLabels, "dataset has no ASK labels");
    ask_weight = static_cast<double>(dataset.size() - asks) / static_cast<double>(asks);
  }

  BcResult out;
  Rng rng(config.seed);
  OptState opt = make_opt_state(policy.net, config.learning_rate);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    double epoch_loss = 0.0;
    double epoch_weight = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.minibatch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.minibatch_size));
      MlpParams grads = MlpParams::zeros(policy.net.layer_sizes);
      double batch_weight = 0.0;
      double batch_loss = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const LabeledStep& s = dataset[order[k]];
        const double w = s.label == HelpDecision::kAsk ? ask_weight : 1.0;
        const MlpOutput fwd = mlp_forward(policy.net, s.features.values);
        CrossEntropy ce = softmax_cross_entropy(fwd.output, static_cast<std::size_t>(s.label));
        for (double& g : ce.logits_grad) g *= w;
        mlp_backward_accumulate(policy.net, fwd.cache, ce.logits_grad, grads);
        batch_loss += w * ce.loss;
        batch_weight += w;
      }
      if (batch_weight <= 0.0) continue;
      scale_in_place(grads, 1.0 / batch_weight);
      adam_step(policy.net, grads, opt);
      epoch_loss += batch_loss;
      epoch_weight += batch_weight;
    }
    const double mean = epoch_weight > 0.0 ? epoch_loss / epoch_weight : 0.0;
    if (!std::isfinite(mean) || !all_finite(policy.net)) {
      throw Error(ErrorCode::kDivergedTraining, "BC loss is not finite");
    }
    out.epoch_loss.push_back(mean);
  }
  out.policy = std::move(policy);
  return out;
}

}  // namespace asknav
