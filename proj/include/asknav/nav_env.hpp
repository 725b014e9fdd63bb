#ifndef ASKNAV_NAV_ENV_HPP_
#define ASKNAV_NAV_ENV_HPP_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace asknav {

enum class Heading : std::uint8_t { kNorth, kEast, kSouth, kWest };
enum class Action : std::uint8_t { kForward, kTurnLeft, kTurnRight, kStop };
enum class Actor : std::uint8_t { kAgent, kHuman, kExpert };

inline constexpr int kNumActions = 4;

std::string_view to_string(Heading heading);
std::string_view to_string(Action action);
std::string_view to_string(Actor actor);
Heading heading_from_string(std::string_view text);
Action action_from_string(std::string_view text);
Actor actor_from_string(std::string_view text);

Heading turn_left(Heading heading);
Heading turn_right(Heading heading);
// Angle of the heading in radians, counter-clockwise from east (north = pi/2).
double heading_angle(Heading heading);

struct Cell {
  int x = 0;
  int y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

// Neighbour of `cell` one step along `heading`; rows grow southwards.
Cell advance(Cell cell, Heading heading);

struct Pose {
  int x = 0;
  int y = 0;
  Heading heading = Heading::kNorth;

  Cell cell() const { return {x, y}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

// Occupancy grid. Anything outside the bounds reads as blocked.
class GridMap {
 public:
  GridMap(int width, int height, std::vector<std::uint8_t> blocked,
          double cell_size = 0.1, std::string map_id = {});

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }
  const std::string& map_id() const { return map_id_; }

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
  }
  bool is_free(Cell c) const { return in_bounds(c) && blocked_[index(c)] == 0; }
  bool is_blocked(Cell c) const { return !is_free(c); }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.x);
  }
  std::size_t cell_count() const { return blocked_.size(); }
  std::size_t free_cell_count() const;
  std::vector<Cell> free_cells() const;
  const std::vector<std::uint8_t>& blocked() const { return blocked_; }

  // ASCII form accepted by load_map; includes the cellsize header.
  std::string to_text() const;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> blocked_;
  double cell_size_;
  std::string map_id_;
};

// Parses the ASCII map format: equal-length rows of '#' (blocked) and '.'
// (free), optionally preceded by a `cellsize <meters>` line.
GridMap load_map(std::string_view text, std::string map_id = {});
GridMap load_map_file(const std::filesystem::path& path);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// Breadth-first step counts from one source cell over the 4-connected free
// cells. Unreachable cells hold -1.
class DistanceField {
 public:
  DistanceField(const GridMap& map, Cell source);

  Cell source() const { return source_; }
  int steps(Cell c) const;
  double meters(Cell c) const;
  bool reachable(Cell c) const { return steps(c) >= 0; }
  int max_steps() const;

 private:
  Cell source_;
  int width_;
  int height_;
  double cell_size_;
  std::vector<int> steps_;
};

// Shortest 4-connected path length in meters, kUnreachable when the cells
// lie in different components.
double geodesic_distance(const GridMap& map, Cell a, Cell b);

struct EpisodeSpec {
  std::string map_id;
  Pose start;
  Cell goal;
  double shortest_path_length = 0.0;
  int max_steps = 500;
  std::uint64_t seed = 0;
};

struct SensorConfig {
  int num_rays = 16;
  int max_range_cells = 10;
};

struct Observation {
  std::vector<double> rays;
  double distance_to_goal = 0.0;
  double relative_heading = 0.0;
  double cell_size = 0.1;  // sensor resolution, not part of as_vector()

  // rays followed by (distance_to_goal, relative_heading).
  std::vector<double> as_vector() const;
};

Observation observe(const GridMap& map, const Pose& pose, Cell goal,
                    const SensorConfig& sensor = {});

struct GoalBearing {
  double distance = 0.0;          // euclidean, meters
  double relative_heading = 0.0;  // goal bearing minus heading, (-pi, pi]
};

// The point-goal part of observe() without the ray casting.
GoalBearing goal_bearing(const GridMap& map, const Pose& pose, Cell goal);

// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

struct EpisodeState {
  Pose pose;
  Cell goal;
  int max_steps = 500;
  int steps = 0;
  int help_requests = 0;      // C_r
  int intervention_path = 0;  // c_p, steps of the active intervention
  int human_actions = 0;      // C_h
  int agent_actions = 0;      // C_a
  double path_length = 0.0;   // meters actually travelled
  // Geodesic distance to goal in meters: entry 0 at reset, one per step.
  std::vector<double> distance_history;
  bool terminated = false;
  bool stopped = false;
  std::shared_ptr<const DistanceField> goal_field;

  double distance_to_goal() const { return distance_history.back(); }
};

EpisodeState start_episode(const GridMap& map, const EpisodeSpec& spec);

struct StepResult {
  bool moved = false;
  bool collided = false;
};

// Advances the episode by one action. Forward into a blocked cell consumes
// the step without moving.
StepResult step(const GridMap& map, EpisodeState& state, Action action,
                Actor actor);

// Squared cell offset below 4 means the stop is within two agent widths.
bool within_success_radius(Cell a, Cell b);
bool is_success(const EpisodeState& state);

inline constexpr int kMaxSampleAttempts = 10'000;

// Maps keyed by map_id.
using MapSet = std::map<std::string, GridMap>;

const GridMap& find_map(const MapSet& maps, const std::string& map_id);
// Loads every *.map file in `dir`; map_id is the file stem.
MapSet load_map_dir(const std::filesystem::path& dir);

EpisodeSpec sample_episode(const GridMap& map, std::uint64_t seed,
                           double min_geodesic, int max_steps = 500);

}  // namespace asknav

#endif  // ASKNAV_NAV_ENV_HPP_
