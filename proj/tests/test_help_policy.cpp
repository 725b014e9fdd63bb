#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "asknav/agent.hpp"
#include "asknav/error.hpp"
#include "asknav/help_policy.hpp"
#include "asknav/suites.hpp"
#include "test_util.hpp"

using namespace asknav;

namespace {

std::vector<double> encoder_stub(double fill = 0.25) { return std::vector<double>(64, fill); }

HelpFeatures all_features(double now, std::optional<double> before, double rel = 0.3) {
  std::optional<PointGoal> prev;
  if (before) prev = PointGoal{*before, 0.0};
  return assemble_features(FeatureVariant::kAll, encoder_stub(), {now, rel}, prev, 10, 4, 100);
}

// Policy whose output logits are (0, bias) regardless of input.
HelpPolicy constant_policy(FeatureVariant v, double bias) {
  HelpPolicy p = make_help_policy(v, 1);
  for (auto& w : p.net.weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : p.net.biases) std::fill(b.begin(), b.end(), 0.0);
  p.net.biases.back()[1] = bias;
  return p;
}

}  // namespace

TEST_CASE("feature widths per variant") {
  CHECK(help_input_width(FeatureVariant::kEncoder, 64) == 64);
  CHECK(help_input_width(FeatureVariant::kPointPath, 64) == 3);
  CHECK(help_input_width(FeatureVariant::kAll, 64) == 68);
  for (FeatureVariant v : {FeatureVariant::kEncoder, FeatureVariant::kPointPath, FeatureVariant::kAll}) {
    const HelpFeatures f = assemble_features(v, encoder_stub(), {0.5, 0.1}, std::nullopt, 0, 0, 50);
    CHECK(f.values.size() == help_input_width(v, 64));
    const HelpPolicy p = make_help_policy(v, 3);
    CHECK(p.net.layer_sizes == std::vector<std::size_t>{help_input_width(v, 64), 64, 64, 2});
  }
}

TEST_CASE("distance change and layout") {
  // closer by 0.1 m since the previous step
  const HelpFeatures f = all_features(0.9, 1.0);
  CHECK(f.values[64] == doctest::Approx(0.1));
  CHECK(f.values[65] == doctest::Approx(0.3));
  CHECK(f.values[66] == doctest::Approx(0.04));
  CHECK(f.values[67] == doctest::Approx(0.10));
  CHECK(all_features(1.1, 1.0).values[64] == doctest::Approx(-0.1));
  CHECK(all_features(0.9, std::nullopt).values[64] == 0.0);

  const HelpFeatures pp = assemble_features(FeatureVariant::kPointPath, {}, {0.7, -1.0},
                                            PointGoal{0.8, 0.0}, 3, 2, 10);
  REQUIRE(pp.values.size() == 3);
  CHECK(pp.values[0] == doctest::Approx(0.1));
  CHECK(pp.values[1] == -1.0);
  CHECK(pp.values[2] == doctest::Approx(0.2));
  const HelpFeatures clamp = assemble_features(FeatureVariant::kAll, encoder_stub(), {0.7, 0.0},
                                               std::nullopt, 500, 900, 100);
  CHECK(clamp.values[66] == 1.0);
  CHECK(clamp.values[67] == 1.0);

  CHECK(code_of([] {
          assemble_features(FeatureVariant::kEncoder, {}, {0.5, 0.0}, std::nullopt, 0, 0, 10);
        }) == ErrorCode::kVariantShapeMismatch);
}

TEST_CASE("the encoder block comes from the agent unchanged") {
  const AgentPolicy agent = make_scripted_agent(2);
  const GridMap map = fixture_map("pillars10");
  const Observation o = observe(map, {2, 2, Heading::kSouth}, {7, 7});
  const AgentStep s = agent_act(agent, o);
  const HelpFeatures f = assemble_features(FeatureVariant::kAll, s.features,
                                           goal_bearing(map, {2, 2, Heading::kSouth}, {7, 7}),
                                           std::nullopt, 0, 0, 100);
  CHECK(std::vector<double>(f.values.begin(), f.values.begin() + 64) == s.features);
  CHECK(f.values[65] == doctest::Approx(o.relative_heading));
}

TEST_CASE("zero network asks with probability one half") {
  const HelpPolicy p = constant_policy(FeatureVariant::kAll, 0.0);
  CHECK(ask_probability(p, all_features(1.0, 1.1)) == doctest::Approx(0.5));
  // strict comparison: exactly at the threshold stays PROCEED
  CHECK(decide_help(p, all_features(1.0, 1.1), DecisionMode::kArgmax, 0).decision ==
        HelpDecision::kProceed);
}

TEST_CASE("argmax threshold behaviour") {
  HelpPolicy p = constant_policy(FeatureVariant::kAll, std::log(0.7 / 0.3));
  const HelpFeatures f = all_features(1.0, 1.1);
  CHECK(ask_probability(p, f) == doctest::Approx(0.7));
  CHECK(decide_help(p, f, DecisionMode::kArgmax, 0).decision == HelpDecision::kAsk);
  p.ask_threshold = 0.8;
  CHECK(decide_help(p, f, DecisionMode::kArgmax, 0).decision == HelpDecision::kProceed);
  p.ask_threshold = 0.6;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(decide_help(p, f, DecisionMode::kArgmax, seed).decision == HelpDecision::kAsk);
  }
}

TEST_CASE("sampling follows the ask probability and is seeded") {
  const HelpPolicy p = constant_policy(FeatureVariant::kAll, std::log(0.3 / 0.7));
  const HelpFeatures f = all_features(1.0, 1.1);
  int asks = 0;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    const HelpChoice c = decide_help(p, f, DecisionMode::kSample, seed);
    CHECK(c.decision == decide_help(p, f, DecisionMode::kSample, seed).decision);
    if (c.decision == HelpDecision::kAsk) ++asks;
  }
  CHECK(asks / 4000.0 == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("fresh policies ask at a moderate rate") {
  const AgentPolicy agent = make_scripted_agent(1);
  const GridMap map = fixture_map("pillars10");
  std::vector<std::pair<Observation, GoalBearing>> states;
  for (Cell c : map.free_cells()) {
    const Pose pose{c.x, c.y, Heading::kNorth};
    states.emplace_back(observe(map, pose, {5, 5}), goal_bearing(map, pose, {5, 5}));
  }
  for (FeatureVariant v : {FeatureVariant::kEncoder, FeatureVariant::kPointPath, FeatureVariant::kAll}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const HelpPolicy p = make_help_policy(v, seed);
      double mean = 0.0;
      for (const auto& [obs, bearing] : states) {
        const HelpFeatures f = assemble_features(v, agent_act(agent, obs).features, bearing,
                                                 std::nullopt, 3, 2, 100);
        mean += ask_probability(p, f);
      }
      mean /= static_cast<double>(states.size());
      CHECK(mean > 0.2);
      CHECK(mean < 0.8);
    }
  }
}

TEST_CASE("ask probability is continuous in the features") {
  const HelpPolicy p = make_help_policy(FeatureVariant::kAll, 7);
  std::mt19937 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    HelpFeatures f = all_features(1.0, 1.05, normal(rng));
    for (double& v : f.values) v += 0.1 * normal(rng);
    HelpFeatures g = f;
    for (double& v : g.values) v += 1e-7 * normal(rng);
    CHECK(std::abs(ask_probability(p, f) - ask_probability(p, g)) < 1e-5);
  }
}

TEST_CASE("variant mismatch is rejected") {
  const HelpPolicy p = make_help_policy(FeatureVariant::kPointPath, 1);
  CHECK(code_of([&] { ask_probability(p, all_features(1.0, 1.0)); }) ==
        ErrorCode::kVariantShapeMismatch);
  CHECK(code_of([] { variant_from_string("both"); }) == ErrorCode::kInvalidArgument);
  CHECK(variant_from_string("point_path") == FeatureVariant::kPointPath);
}

TEST_CASE("help policy file round trip") {
  HelpPolicy p = make_help_policy(FeatureVariant::kEncoder, 9);
  p.ask_threshold = 0.65;
  const auto path = std::filesystem::temp_directory_path() / "asknav_help_test.json";
  save_help_policy(p, path);
  const HelpPolicy back = load_help_policy(path);
  CHECK(back.net == p.net);
  CHECK(back.variant == p.variant);
  CHECK(back.ask_threshold == p.ask_threshold);
  std::filesystem::remove(path);
}
