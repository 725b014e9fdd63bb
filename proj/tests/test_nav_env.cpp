#include <doctest.h>

#include <cmath>
#include <random>

#include "asknav/error.hpp"
#include "asknav/nav_env.hpp"
#include "asknav/suites.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace asknav;

namespace {

EpisodeState state_at(const GridMap& map, Pose start, Cell goal, int max_steps = 500) {
  EpisodeSpec spec;
  spec.map_id = map.map_id();
  spec.start = start;
  spec.goal = goal;
  spec.shortest_path_length = geodesic_distance(map, start.cell(), goal);
  spec.max_steps = max_steps;
  return start_episode(map, spec);
}

}  // namespace

TEST_CASE("load_map parses sizes and free cells") {
  const GridMap open = load_map("...\n...\n...\n");
  CHECK(open.width() == 3);
  CHECK(open.height() == 3);
  CHECK(open.free_cell_count() == 9);

  // counted by hand: the ring leaves a 3x3 interior
  CHECK(fixture_map("ring5").free_cell_count() == 9);

  const GridMap with_header = load_map("cellsize 0.25\n...\n.#.\n...\n");
  CHECK(with_header.cell_size() == doctest::Approx(0.25));
  CHECK(with_header.is_blocked({1, 1}));
}

TEST_CASE("load_map rejects bad input") {
  CHECK(code_of([] { load_map("...\n...\n..\n"); }) == ErrorCode::kMalformedMap);
  CHECK(code_of([] { load_map("...\n.x.\n...\n"); }) == ErrorCode::kMalformedMap);
  CHECK(code_of([] { load_map("###\n###\n###\n"); }) == ErrorCode::kUnreachableMap);
  CHECK(code_of([] { load_map("###\n#.#\n###\n"); }) == ErrorCode::kUnreachableMap);
  CHECK(code_of([] { load_map("..\n..\n"); }) == ErrorCode::kMalformedMap);
}

TEST_CASE("map text round trip") {
  for (const Fixture& f : fixtures()) {
    const GridMap m = fixture_map(f.name);
    const GridMap back = load_map(m.to_text(), f.name);
    CHECK(back.blocked() == m.blocked());
    CHECK(back.cell_size() == m.cell_size());
  }
}

TEST_CASE("geodesic distance examples") {
  const GridMap open = fixture_map("open3");
  CHECK(geodesic_distance(open, {1, 1}, {1, 1}) == 0.0);
  CHECK(geodesic_distance(open, {0, 0}, {2, 0}) == doctest::Approx(0.2));

  const GridMap detour = fixture_map("detour5");
  const oracle::Grid g = oracle::parse(fixtures()[2].text);
  const int steps = oracle::bfs(g, 0, 0, 0, 2);
  CHECK(steps == 10);
  CHECK(geodesic_distance(detour, {0, 0}, {0, 2}) == doctest::Approx(steps * 0.1));

  CHECK(code_of([&] { geodesic_distance(detour, {0, 1}, {0, 0}); }) ==
        ErrorCode::kBlockedEndpoint);

  const GridMap split = load_map("..#..\n..#..\n..#..\n");
  CHECK(std::isinf(geodesic_distance(split, {0, 0}, {4, 0})));
}

TEST_CASE("geodesic distance equals the BFS oracle on 100 random maps") {
  std::mt19937 rng(1234);
  int compared = 0;
  for (int m = 0; m < 100; ++m) {
    std::uniform_int_distribution<int> size(3, 14);
    oracle::Grid g = oracle::random_grid(rng, size(rng), size(rng), 0.3);
    g.rows[0][0] = '.';
    g.rows[0][1] = '.';
    const GridMap map = load_map(oracle::text(g));
    std::vector<Cell> free = map.free_cells();
    std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
    for (int k = 0; k < 30; ++k) {
      const Cell a = free[pick(rng)];
      const Cell b = free[pick(rng)];
      const int expect = oracle::bfs(g, a.x, a.y, b.x, b.y);
      const double got = geodesic_distance(map, a, b);
      if (expect < 0) {
        CHECK(std::isinf(got));
      } else {
        CHECK(got == doctest::Approx(expect * 0.1).epsilon(1e-12));
      }
      ++compared;
    }
  }
  CHECK(compared == 3000);
}

TEST_CASE("geodesic triangle inequality, exhaustive on small fixtures") {
  for (const char* name : {"detour5", "ring5", "corridor_l", "pillars10"}) {
    const GridMap map = fixture_map(name);
    const std::vector<Cell> cells = map.free_cells();
    std::vector<DistanceField> fields;
    for (Cell c : cells) fields.emplace_back(map, c);
    for (std::size_t a = 0; a < cells.size(); ++a) {
      for (std::size_t b = 0; b < cells.size(); ++b) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
          const int ab = fields[a].steps(cells[b]);
          const int bc = fields[b].steps(cells[c]);
          const int ac = fields[a].steps(cells[c]);
          if (ab >= 0 && bc >= 0) REQUIRE(ac <= ab + bc);
        }
      }
    }
  }
}

TEST_CASE("step kinematics") {
  const GridMap map = load_map(".....\n.....\n..#..\n.....\n.....\n");
  EpisodeState s = state_at(map, {2, 4, Heading::kNorth}, {0, 0});

  step(map, s, Action::kForward, Actor::kAgent);
  CHECK(s.pose == Pose{2, 3, Heading::kNorth});
  CHECK(s.agent_actions == 1);
  CHECK(s.path_length == doctest::Approx(0.1));

  const StepResult bump = step(map, s, Action::kForward, Actor::kHuman);
  CHECK(bump.collided);
  CHECK(s.pose == Pose{2, 3, Heading::kNorth});
  CHECK(s.human_actions == 1);
  CHECK(s.steps == 2);

  step(map, s, Action::kTurnLeft, Actor::kExpert);
  CHECK(s.pose == Pose{2, 3, Heading::kWest});
  step(map, s, Action::kTurnRight, Actor::kAgent);
  step(map, s, Action::kTurnRight, Actor::kAgent);
  CHECK(s.pose.heading == Heading::kEast);
  CHECK(s.distance_history.size() == 6);

  step(map, s, Action::kStop, Actor::kAgent);
  CHECK(s.terminated);
  CHECK(s.stopped);
  CHECK(code_of([&] { step(map, s, Action::kForward, Actor::kAgent); }) ==
        ErrorCode::kEpisodeTerminated);
}

TEST_CASE("the map edge is a wall") {
  const GridMap map = fixture_map("open3");
  EpisodeState s = state_at(map, {0, 0, Heading::kWest}, {2, 2});
  CHECK(step(map, s, Action::kForward, Actor::kAgent).collided);
  CHECK(s.pose.cell() == Cell{0, 0});
}

TEST_CASE("episodes end at max_steps") {
  const GridMap map = fixture_map("open10");
  EpisodeState s = state_at(map, {0, 0, Heading::kNorth}, {9, 9}, 3);
  for (int i = 0; i < 3; ++i) step(map, s, Action::kTurnLeft, Actor::kAgent);
  CHECK(s.terminated);
  CHECK_FALSE(s.stopped);
  CHECK_FALSE(is_success(s));
}

TEST_CASE("success radius") {
  const GridMap map = fixture_map("open10");
  {
    EpisodeState s = state_at(map, {5, 5, Heading::kNorth}, {5, 5});
    step(map, s, Action::kStop, Actor::kAgent);
    CHECK(is_success(s));
  }
  {
    EpisodeState s = state_at(map, {5, 6, Heading::kNorth}, {5, 5});
    step(map, s, Action::kStop, Actor::kAgent);
    CHECK(is_success(s));
  }
  {
    // diagonal neighbour: 0.141 m
    EpisodeState s = state_at(map, {6, 6, Heading::kNorth}, {5, 5});
    step(map, s, Action::kStop, Actor::kAgent);
    CHECK(is_success(s));
  }
  {
    EpisodeState s = state_at(map, {5, 7, Heading::kNorth}, {5, 5});
    step(map, s, Action::kStop, Actor::kAgent);
    CHECK_FALSE(is_success(s));
  }
  CHECK(within_success_radius({0, 0}, {1, 1}));
  CHECK_FALSE(within_success_radius({0, 0}, {2, 0}));
}

TEST_CASE("observe: walls, goal bearing and the full ray vector") {
  const GridMap ring = fixture_map("ring5");
  const Observation wall = observe(ring, {2, 1, Heading::kNorth}, {2, 3});
  CHECK(wall.rays[0] == doctest::Approx(0.1));

  const GridMap open = fixture_map("open10");
  const Observation ahead = observe(open, {5, 8, Heading::kNorth}, {5, 5});
  CHECK(ahead.relative_heading == doctest::Approx(0.0));
  CHECK(ahead.distance_to_goal == doctest::Approx(0.3));

  const Observation left = observe(open, {5, 5, Heading::kNorth}, {2, 5});
  CHECK(left.relative_heading == doctest::Approx(M_PI / 2));
  const Observation behind = observe(open, {5, 5, Heading::kNorth}, {5, 8});
  CHECK(behind.relative_heading == doctest::Approx(M_PI));

  const oracle::Grid g = oracle::parse(fixtures()[6].text);  // pillars10
  const GridMap pillars = fixture_map("pillars10");
  for (int h = 0; h < 4; ++h) {
    for (Cell c : {Cell{0, 0}, Cell{9, 9}, Cell{4, 4}, Cell{1, 3}}) {
      const Observation o = observe(pillars, {c.x, c.y, static_cast<Heading>(h)}, {5, 5});
      const std::vector<double> expect = oracle::rays(g, c.x, c.y, h, 16, 10);
      REQUIRE(o.rays.size() == 16);
      for (int i = 0; i < 16; ++i) CHECK(o.rays[i] == doctest::Approx(expect[i] * 0.1));
    }
  }
}

TEST_CASE("observe is pure and rays stay in range") {
  const GridMap map = fixture_map("pillars10");
  for (Cell c : map.free_cells()) {
    const Pose p{c.x, c.y, Heading::kEast};
    const Observation a = observe(map, p, {0, 0});
    const Observation b = observe(map, p, {0, 0});
    CHECK(a.as_vector() == b.as_vector());
    for (double r : a.rays) {
      CHECK(r >= 0.0);
      CHECK(r <= 1.0 + 1e-12);
    }
    CHECK(a.relative_heading > -M_PI);
    CHECK(a.relative_heading <= M_PI);
  }
}

TEST_CASE("random actions never enter walls and path length bounds geodesic") {
  std::mt19937 rng(99);
  const GridMap map = fixture_map("pillars10");
  for (int trial = 0; trial < 200; ++trial) {
    const EpisodeSpec spec = sample_episode(map, static_cast<std::uint64_t>(trial), 0.2, 60);
    EpisodeState s = start_episode(map, spec);
    std::uniform_int_distribution<int> act(0, 2);
    while (!s.terminated) {
      step(map, s, static_cast<Action>(act(rng)), Actor::kAgent);
      REQUIRE(map.is_free(s.pose.cell()));
    }
    CHECK(s.path_length + 1e-12 >= geodesic_distance(map, spec.start.cell(), s.pose.cell()));
  }
}

TEST_CASE("sample_episode") {
  const GridMap map = fixture_map("pillars10");
  const EpisodeSpec a = sample_episode(map, 7, 0.5);
  const EpisodeSpec b = sample_episode(map, 7, 0.5);
  CHECK(a.start == b.start);
  CHECK(a.goal == b.goal);
  const oracle::Grid g = oracle::parse(fixtures()[6].text);
  const int steps = oracle::bfs(g, a.start.x, a.start.y, a.goal.x, a.goal.y);
  CHECK(steps * 0.1 >= 0.5 - 1e-12);
  CHECK(a.shortest_path_length == doctest::Approx(steps * 0.1));
  CHECK_FALSE(a.start.cell() == a.goal);

  CHECK(code_of([&] { sample_episode(fixture_map("open3"), 1, 0.5); }) ==
        ErrorCode::kNoFeasiblePair);
}
