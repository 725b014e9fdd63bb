#ifndef ASKNAV_SUITES_HPP_
#define ASKNAV_SUITES_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asknav/nav_env.hpp"

namespace asknav {

// Hand-written maps used by the tests and shipped by `gen-maps`.
struct Fixture {
  std::string name;
  std::string text;
};

// open3, ring5, detour5, corridor_l, open10, block10, pillars10, trap12.
const std::vector<Fixture>& fixtures();
GridMap fixture_map(const std::string& name);

// Names of the fixtures with only convex obstacles (at most 10x10).
std::vector<std::string> convex_fixture_names();

// Starts on trap12 from which the scripted agent walks into the pocket.
std::vector<EpisodeSpec> trap_fixture_episodes();

struct Suite {
  std::vector<GridMap> maps;
  std::vector<EpisodeSpec> episodes;

  MapSet map_set() const;
};

struct SuiteConfig {
  std::string prefix = "train";
  int obstacle_maps = 12;
  int trap_maps = 12;
  int episodes_per_obstacle_map = 3;
  int episodes_per_trap_map = 2;
  int width = 16;
  int height = 16;
  double min_geodesic = 0.8;
  int max_steps = 500;
  std::uint64_t seed = 0;
};

// Obstacle maps carry separated rectangular blocks and random episodes. Trap
// maps carry a U-shaped pocket whose opening faces the start, with the goal
// just behind its closed side.
Suite generate_suite(const SuiteConfig& config);

// Trap maps are named `<prefix>_trap_<n>` (and the trap12 fixture).
bool is_trap_map(const std::string& map_id);

// Episodes for demonstration recording: half from trap maps, the rest from
// the other maps, each in file order.
std::vector<EpisodeSpec> demo_episodes(std::span<const EpisodeSpec> episodes,
                                       int count);

SuiteConfig training_suite_config(std::uint64_t seed = 11);
SuiteConfig validation_suite_config(std::uint64_t seed = 23);

}  // namespace asknav

#endif  // ASKNAV_SUITES_HPP_
