#include "asknav/help_policy.hpp"

#include <algorithm>
#include <cmath>

#include "asknav/error.hpp"
#include "asknav/rng.hpp"

namespace asknav {

std::string_view to_string(FeatureVariant variant) {
  switch (variant) {
    case FeatureVariant::kEncoder: return "encoder";
    case FeatureVariant::kPointPath: return "point_path";
    case FeatureVariant::kAll: return "all";
  }
  return "?";
}

FeatureVariant variant_from_string(std::string_view text) {
  if (text == "encoder" || text == "ENCODER") return FeatureVariant::kEncoder;
  if (text == "point_path" || text == "POINT_PATH") return FeatureVariant::kPointPath;
  if (text == "all" || text == "ALL") return FeatureVariant::kAll;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown feature variant '" + std::string(text) + "'");
}

std::size_t help_input_width(FeatureVariant variant, std::size_t encoder_width) {
  switch (variant) {
    case FeatureVariant::kEncoder: return encoder_width;
    case FeatureVariant::kPointPath: return 3;
    case FeatureVariant::kAll: return encoder_width + 4;
  }
  return 0;
}

HelpFeatures assemble_features(FeatureVariant variant,
                               std::span<const double> encoder_features,
                               PointGoal now, std::optional<PointGoal> previous,
                               int steps_since_help, int path_cells_since_help,
                               int max_steps) {
  if (max_steps <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_steps must be positive");
  }
  const bool needs_encoder = variant != FeatureVariant::kPointPath;
  if (needs_encoder && encoder_features.empty()) {
    throw Error(ErrorCode::kVariantShapeMismatch,
                std::string(to_string(variant)) + " variant needs encoder features");
  }
  const double diff = previous ? previous->distance - now.distance : 0.0;
  auto normalized = [max_steps](int count) {
    return std::clamp(static_cast<double>(count) / max_steps, 0.0, 1.0);
  };

  HelpFeatures f;
  f.variant = variant;
  if (needs_encoder) {
    f.values.assign(encoder_features.begin(), encoder_features.end());
  }
  if (variant != FeatureVariant::kEncoder) {
    f.values.push_back(diff);
    f.values.push_back(now.relative_heading);
    f.values.push_back(normalized(path_cells_since_help));
  }
  if (variant == FeatureVariant::kAll) {
    f.values.push_back(normalized(steps_since_help));
  }
  for (double v : f.values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite help feature");
    }
  }
  return f;
}

HelpPolicy make_help_policy(FeatureVariant variant, std::uint64_t seed,
                            std::size_t encoder_width, std::size_t hidden_width) {
  HelpPolicy p;
  p.variant = variant;
  p.net = init_mlp({help_input_width(variant, encoder_width), hidden_width,
                    hidden_width, 2},
                   seed);
  return p;
}

double ask_probability(const HelpPolicy& policy, const HelpFeatures& features) {
  if (features.variant != policy.variant ||
      features.values.size() != policy.net.input_size()) {
    throw Error(ErrorCode::kVariantShapeMismatch,
                "features do not match the help policy variant");
  }
  const std::vector<double> logits = mlp_predict(policy.net, features.values);
  return softmax(logits)[static_cast<std::size_t>(HelpDecision::kAsk)];
}

HelpChoice decide_help(const HelpPolicy& policy, const HelpFeatures& features,
                       DecisionMode mode, std::uint64_t rng_seed) {
  HelpChoice c;
  c.ask_probability = ask_probability(policy, features);
  bool ask = false;
  if (mode == DecisionMode::kArgmax) {
    ask = c.ask_probability > policy.ask_threshold;
  } else {
    Rng rng(rng_seed);
    ask = uniform01(rng) < c.ask_probability;
  }
  c.decision = ask ? HelpDecision::kAsk : HelpDecision::kProceed;
  return c;
}

nlohmann::json help_policy_to_json(const HelpPolicy& policy) {
  nlohmann::json j = mlp_to_json(policy.net);
  j["variant"] = to_string(policy.variant);
  j["ask_threshold"] = policy.ask_threshold;
  return j;
}

HelpPolicy help_policy_from_json(const nlohmann::json& j) {
  HelpPolicy p;
  p.net = mlp_from_json(j);
  try {
    p.variant = variant_from_string(j.at("variant").get<std::string>());
    p.ask_threshold = j.value("ask_threshold", 0.5);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kShapeMismatch, std::string("bad help policy json: ") + e.what());
  }
  if (p.net.output_size() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "help policy must have 2 outputs");
  }
  return p;
}

void save_help_policy(const HelpPolicy& policy, const std::filesystem::path& path) {
  write_file_atomic(path, help_policy_to_json(policy).dump(1) + "\n");
}

HelpPolicy load_help_policy(const std::filesystem::path& path) {
  return help_policy_from_json(read_json_file(path));
}

}  // namespace asknav
