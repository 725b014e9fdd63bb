#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "asknav/agent.hpp"
#include "asknav/error.hpp"
#include "asknav/suites.hpp"
#include "test_util.hpp"

using namespace asknav;

namespace {

Observation make_obs(double distance, double rel, std::vector<double> rays) {
  Observation o;
  o.rays = std::move(rays);
  o.distance_to_goal = distance;
  o.relative_heading = rel;
  return o;
}

std::vector<double> open_rays() { return std::vector<double>(16, 1.0); }

// Drives one episode with the agent alone.
EpisodeState drive(const GridMap& map, const AgentPolicy& agent, Pose start, Cell goal,
                   int max_steps = 500) {
  EpisodeSpec spec;
  spec.map_id = map.map_id();
  spec.start = start;
  spec.goal = goal;
  spec.shortest_path_length = geodesic_distance(map, start.cell(), goal);
  spec.max_steps = max_steps;
  EpisodeState s = start_episode(map, spec);
  while (!s.terminated) {
    const Action a = agent_act(agent, observe(map, s.pose, s.goal, agent.sensor)).action;
    step(map, s, a, Actor::kAgent);
  }
  return s;
}

}  // namespace

TEST_CASE("scripted rule examples") {
  CHECK(scripted_action(make_obs(0.1, 2.0, open_rays())) == Action::kStop);
  CHECK(scripted_action(make_obs(0.0, 0.0, open_rays())) == Action::kStop);
  CHECK(scripted_action(make_obs(1.0, 0.2, open_rays())) == Action::kForward);
  CHECK(scripted_action(make_obs(1.0, M_PI, open_rays())) == Action::kTurnLeft);
  CHECK(scripted_action(make_obs(1.0, -2.8, open_rays())) == Action::kTurnRight);
  CHECK(scripted_action(make_obs(1.0, M_PI / 2, open_rays())) == Action::kTurnLeft);
  CHECK(scripted_action(make_obs(1.0, -M_PI / 2, open_rays())) == Action::kTurnRight);

  // blocked ahead, symmetric sides: tie turns left
  std::vector<double> wall = open_rays();
  wall[0] = 0.1;
  CHECK(scripted_action(make_obs(1.0, 0.0, wall)) == Action::kTurnLeft);
  // blocked ahead, more room on the right
  wall[4] = 0.3;
  CHECK(scripted_action(make_obs(1.0, 0.0, wall)) == Action::kTurnRight);

  // goal to the left but left blocked: follow the wall forward
  std::vector<double> side = open_rays();
  side[4] = 0.1;
  CHECK(scripted_action(make_obs(1.0, M_PI / 2, side)) == Action::kForward);
  // left and front blocked: turn away
  side[0] = 0.1;
  CHECK(scripted_action(make_obs(1.0, M_PI / 2, side)) == Action::kTurnRight);
}

TEST_CASE("scripted agent reaches every goal on convex fixtures") {
  const AgentPolicy agent = make_scripted_agent(1);
  for (const std::string& name : convex_fixture_names()) {
    const GridMap map = fixture_map(name);
    const std::vector<Cell> cells = map.free_cells();
    int failures = 0;
    int episodes = 0;
    for (Cell start : cells) {
      for (Cell goal : cells) {
        for (int h = 0; h < 4; ++h) {
          const EpisodeState s = drive(map, agent, {start.x, start.y, static_cast<Heading>(h)}, goal);
          if (!is_success(s)) ++failures;
          ++episodes;
        }
      }
    }
    INFO(name << ": " << failures << " of " << episodes);
    CHECK(failures == 0);
  }
}

TEST_CASE("scripted agent fails on the trap fixture") {
  const AgentPolicy agent = make_scripted_agent(1);
  const GridMap map = fixture_map("trap12");
  const std::vector<EpisodeSpec> episodes = trap_fixture_episodes();
  REQUIRE(episodes.size() == 8);
  for (const EpisodeSpec& e : episodes) {
    const EpisodeState s = drive(map, agent, e.start, e.goal, e.max_steps);
    CHECK_FALSE(is_success(s));
  }
}

TEST_CASE("encoder is pure and shaped") {
  const AgentPolicy agent = make_scripted_agent(5);
  CHECK(agent.encoder.layer_sizes == std::vector<std::size_t>{18, 64, 64});
  CHECK(agent.feature_width() == 64);
  const GridMap map = fixture_map("pillars10");
  const Observation o = observe(map, {1, 1, Heading::kEast}, {8, 8});
  const AgentStep a = agent_act(agent, o);
  const AgentStep b = agent_act(agent, o);
  CHECK(a.features == b.features);
  CHECK(a.features.size() == 64);
  CHECK(make_scripted_agent(5).hash() == agent.hash());
  CHECK(make_scripted_agent(6).hash() != agent.hash());

  const AgentPolicy learned = make_learned_agent(5);
  CHECK(learned.head.layer_sizes == std::vector<std::size_t>{64, 64, 4});
  CHECK(agent_act(learned, o).features.size() == 64);
}

TEST_CASE("pretraining with zero steps returns the seeded initialisation") {
  const std::vector<GridMap> maps{fixture_map("open10")};
  PretrainConfig cfg;
  cfg.steps = 0;
  cfg.seed = 4;
  const AgentPolicy a = pretrain_agent(maps, cfg);
  const AgentPolicy b = pretrain_agent(maps, cfg);
  CHECK(a.frozen);
  CHECK(a.kind == AgentKind::kLearned);
  CHECK(a.hash() == b.hash());
}

TEST_CASE("pretraining 50k steps learns open10") {
  const GridMap map = fixture_map("open10");
  const std::vector<GridMap> maps{map};
  PretrainConfig cfg;
  cfg.seed = 1;
  const AgentPolicy agent = pretrain_agent(maps, cfg);
  int ok = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const EpisodeSpec e = sample_episode(map, 1000 + static_cast<std::uint64_t>(i), 0.3, 150);
    if (is_success(drive(map, agent, e.start, e.goal, e.max_steps))) ++ok;
  }
  INFO("success " << ok << "/" << n);
  CHECK(static_cast<double>(ok) / n >= 0.8);
}

TEST_CASE("agent file round trip") {
  AgentPolicy agent = make_learned_agent(8);
  agent.frozen = true;
  const auto path = std::filesystem::temp_directory_path() / "asknav_agent_test.json";
  save_agent(agent, path);
  const AgentPolicy back = load_agent(path);
  CHECK(back.hash() == agent.hash());
  CHECK(back.kind == agent.kind);
  CHECK(back.frozen);
  const Observation o = observe(fixture_map("open3"), {0, 0, Heading::kEast}, {2, 2});
  CHECK(agent_act(back, o).action == agent_act(agent, o).action);
  std::filesystem::remove(path);
}
