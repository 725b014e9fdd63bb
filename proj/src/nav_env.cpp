#include "asknav/nav_env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <sstream>

#include "asknav/error.hpp"
#include "asknav/rng.hpp"

namespace asknav {

std::string_view to_string(Heading heading) {
  switch (heading) {
    case Heading::kNorth: return "N";
    case Heading::kEast: return "E";
    case Heading::kSouth: return "S";
    case Heading::kWest: return "W";
  }
  return "?";
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::kForward: return "FORWARD";
    case Action::kTurnLeft: return "TURN_LEFT";
    case Action::kTurnRight: return "TURN_RIGHT";
    case Action::kStop: return "STOP";
  }
  return "?";
}

std::string_view to_string(Actor actor) {
  switch (actor) {
    case Actor::kAgent: return "AGENT";
    case Actor::kHuman: return "HUMAN";
    case Actor::kExpert: return "EXPERT";
  }
  return "?";
}

Heading heading_from_string(std::string_view text) {
  if (text == "N") return Heading::kNorth;
  if (text == "E") return Heading::kEast;
  if (text == "S") return Heading::kSouth;
  if (text == "W") return Heading::kWest;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown heading '" + std::string(text) + "'");
}

Action action_from_string(std::string_view text) {
  if (text == "FORWARD") return Action::kForward;
  if (text == "TURN_LEFT") return Action::kTurnLeft;
  if (text == "TURN_RIGHT") return Action::kTurnRight;
  if (text == "STOP") return Action::kStop;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown action '" + std::string(text) + "'");
}

Actor actor_from_string(std::string_view text) {
  if (text == "AGENT") return Actor::kAgent;
  if (text == "HUMAN") return Actor::kHuman;
  if (text == "EXPERT") return Actor::kExpert;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown actor '" + std::string(text) + "'");
}

Heading turn_left(Heading heading) {
  switch (heading) {
    case Heading::kNorth: return Heading::kWest;
    case Heading::kWest: return Heading::kSouth;
    case Heading::kSouth: return Heading::kEast;
    case Heading::kEast: return Heading::kNorth;
  }
  return heading;
}

Heading turn_right(Heading heading) {
  switch (heading) {
    case Heading::kNorth: return Heading::kEast;
    case Heading::kEast: return Heading::kSouth;
    case Heading::kSouth: return Heading::kWest;
    case Heading::kWest: return Heading::kNorth;
  }
  return heading;
}

double heading_angle(Heading heading) {
  switch (heading) {
    case Heading::kEast: return 0.0;
    case Heading::kNorth: return std::numbers::pi / 2.0;
    case Heading::kWest: return std::numbers::pi;
    case Heading::kSouth: return -std::numbers::pi / 2.0;
  }
  return 0.0;
}

Cell advance(Cell cell, Heading heading) {
  switch (heading) {
    case Heading::kNorth: return {cell.x, cell.y - 1};
    case Heading::kEast: return {cell.x + 1, cell.y};
    case Heading::kSouth: return {cell.x, cell.y + 1};
    case Heading::kWest: return {cell.x - 1, cell.y};
  }
  return cell;
}

namespace {

// Size of the largest 4-connected free component.
std::size_t largest_component(const GridMap& map) {
  std::vector<std::uint8_t> seen(map.cell_count(), 0);
  std::size_t best = 0;
  for (const Cell& c : map.free_cells()) {
    if (seen[map.index(c)]) continue;
    std::size_t size = 0;
    std::deque<Cell> queue{c};
    seen[map.index(c)] = 1;
    while (!queue.empty()) {
      Cell cur = queue.front();
      queue.pop_front();
      ++size;
      for (Heading h : {Heading::kNorth, Heading::kEast, Heading::kSouth,
                        Heading::kWest}) {
        Cell next = advance(cur, h);
        if (map.is_free(next) && !seen[map.index(next)]) {
          seen[map.index(next)] = 1;
          queue.push_back(next);
        }
      }
    }
    best = std::max(best, size);
  }
  return best;
}

}  // namespace

GridMap::GridMap(int width, int height, std::vector<std::uint8_t> blocked,
                 double cell_size, std::string map_id)
    : width_(width),
      height_(height),
      blocked_(std::move(blocked)),
      cell_size_(cell_size),
      map_id_(std::move(map_id)) {
  if (width_ < 3 || height_ < 3) {
    throw Error(ErrorCode::kMalformedMap, "map must be at least 3x3");
  }
  if (blocked_.size() !=
      static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
    throw Error(ErrorCode::kMalformedMap, "cell count does not match shape");
  }
  if (!(cell_size_ > 0.0) || !std::isfinite(cell_size_)) {
    throw Error(ErrorCode::kMalformedMap, "cell size must be positive");
  }
  if (largest_component(*this) < 2) {
    throw Error(ErrorCode::kUnreachableMap,
                "no connected free region of at least 2 cells");
  }
}

std::size_t GridMap::free_cell_count() const {
  std::size_t n = 0;
  for (auto b : blocked_) n += (b == 0);
  return n;
}

std::vector<Cell> GridMap::free_cells() const {
  std::vector<Cell> cells;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (is_free({x, y})) cells.push_back({x, y});
    }
  }
  return cells;
}

std::string GridMap::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "cellsize " << cell_size_ << '\n';
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) out << (is_free({x, y}) ? '.' : '#');
    out << '\n';
  }
  return out.str();
}

GridMap load_map(std::string_view text, std::string map_id) {
  double cell_size = 0.1;
  std::vector<std::string> rows;
  std::size_t pos = 0;
  bool first_line = true;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (first_line && line.starts_with("cellsize")) {
      std::istringstream in{std::string(line.substr(8))};
      if (!(in >> cell_size) || !(cell_size > 0.0)) {
        throw Error(ErrorCode::kMalformedMap, "bad cellsize header");
      }
      first_line = false;
      continue;
    }
    first_line = false;
    if (line.empty()) continue;
    rows.emplace_back(line);
  }
  if (rows.empty()) throw Error(ErrorCode::kMalformedMap, "empty map");
  const std::size_t width = rows.front().size();
  std::vector<std::uint8_t> blocked;
  blocked.reserve(width * rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw Error(ErrorCode::kMalformedMap,
                  "row " + std::to_string(r) + " has length " +
                      std::to_string(rows[r].size()) + ", expected " +
                      std::to_string(width));
    }
    for (char ch : rows[r]) {
      if (ch == '#') {
        blocked.push_back(1);
      } else if (ch == '.') {
        blocked.push_back(0);
      } else {
        throw Error(ErrorCode::kMalformedMap,
                    std::string("illegal character '") + ch + "'");
      }
    }
  }
  return GridMap(static_cast<int>(width), static_cast<int>(rows.size()),
                 std::move(blocked), cell_size, std::move(map_id));
}

GridMap load_map_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_map(buffer.str(), path.stem().string());
}

DistanceField::DistanceField(const GridMap& map, Cell source)
    : source_(source),
      width_(map.width()),
      height_(map.height()),
      cell_size_(map.cell_size()),
      steps_(map.cell_count(), -1) {
  if (!map.is_free(source)) {
    throw Error(ErrorCode::kBlockedEndpoint, "distance source is blocked");
  }
  std::deque<Cell> queue{source};
  steps_[map.index(source)] = 0;
  while (!queue.empty()) {
    Cell cur = queue.front();
    queue.pop_front();
    const int d = steps_[map.index(cur)];
    for (Heading h :
         {Heading::kNorth, Heading::kEast, Heading::kSouth, Heading::kWest}) {
      Cell next = advance(cur, h);
      if (map.is_free(next) && steps_[map.index(next)] < 0) {
        steps_[map.index(next)] = d + 1;
        queue.push_back(next);
      }
    }
  }
}

int DistanceField::steps(Cell c) const {
  if (c.x < 0 || c.y < 0 || c.x >= width_ || c.y >= height_) return -1;
  return steps_[static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(c.x)];
}

double DistanceField::meters(Cell c) const {
  const int s = steps(c);
  return s < 0 ? kUnreachable : s * cell_size_;
}

int DistanceField::max_steps() const {
  int best = 0;
  for (int s : steps_) best = std::max(best, s);
  return best;
}

double geodesic_distance(const GridMap& map, Cell a, Cell b) {
  if (!map.is_free(a) || !map.is_free(b)) {
    throw Error(ErrorCode::kBlockedEndpoint,
                "geodesic endpoint is blocked or out of bounds");
  }
  return DistanceField(map, a).meters(b);
}

double wrap_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(radians, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  if (r > std::numbers::pi) r -= kTwoPi;
  return r;
}

std::vector<double> Observation::as_vector() const {
  std::vector<double> v(rays);
  v.push_back(distance_to_goal);
  v.push_back(relative_heading);
  return v;
}

Observation observe(const GridMap& map, const Pose& pose, Cell goal,
                    const SensorConfig& sensor) {
  Observation obs;
  obs.cell_size = map.cell_size();
  obs.rays.resize(static_cast<std::size_t>(sensor.num_rays));
  const double base = heading_angle(pose.heading);
  const double max_range = sensor.max_range_cells * map.cell_size();
  for (int i = 0; i < sensor.num_rays; ++i) {
    const double angle = base + 2.0 * std::numbers::pi * i / sensor.num_rays;
    // Grid rows grow southwards, so the row offset is the negated sine.
    const double dx = std::cos(angle);
    const double dy = -std::sin(angle);
    double distance = max_range;
    for (int k = 1; k <= sensor.max_range_cells; ++k) {
      Cell c{pose.x + static_cast<int>(std::lround(k * dx)),
             pose.y + static_cast<int>(std::lround(k * dy))};
      if (map.is_blocked(c)) {
        distance = k * map.cell_size();
        break;
      }
    }
    obs.rays[static_cast<std::size_t>(i)] = distance;
  }
  const GoalBearing bearing = goal_bearing(map, pose, goal);
  obs.distance_to_goal = bearing.distance;
  obs.relative_heading = bearing.relative_heading;
  return obs;
}

GoalBearing goal_bearing(const GridMap& map, const Pose& pose, Cell goal) {
  const double gx = goal.x - pose.x;
  const double gy = -(goal.y - pose.y);
  GoalBearing b;
  b.distance = std::hypot(gx, gy) * map.cell_size();
  b.relative_heading = (gx == 0.0 && gy == 0.0)
                           ? 0.0
                           : wrap_angle(std::atan2(gy, gx) - heading_angle(pose.heading));
  return b;
}

const GridMap& find_map(const MapSet& maps, const std::string& map_id) {
  auto it = maps.find(map_id);
  if (it == maps.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown map_id '" + map_id + "'");
  }
  return it->second;
}

MapSet load_map_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".map") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  MapSet maps;
  for (const auto& f : files) {
    GridMap m = load_map_file(f);
    maps.emplace(m.map_id(), std::move(m));
  }
  return maps;
}

EpisodeState start_episode(const GridMap& map, const EpisodeSpec& spec) {
  if (!map.is_free(spec.start.cell()) || !map.is_free(spec.goal)) {
    throw Error(ErrorCode::kBlockedEndpoint, "episode start or goal blocked");
  }
  EpisodeState state;
  state.pose = spec.start;
  state.goal = spec.goal;
  state.max_steps = spec.max_steps;
  state.goal_field = std::make_shared<DistanceField>(map, spec.goal);
  if (!state.goal_field->reachable(spec.start.cell())) {
    throw Error(ErrorCode::kUnreachable, "goal unreachable from start");
  }
  state.distance_history.push_back(state.goal_field->meters(spec.start.cell()));
  return state;
}

StepResult step(const GridMap& map, EpisodeState& state, Action action,
                Actor actor) {
  if (state.terminated) {
    throw Error(ErrorCode::kEpisodeTerminated, "step after termination");
  }
  StepResult result;
  switch (action) {
    case Action::kForward: {
      Cell next = advance(state.pose.cell(), state.pose.heading);
      if (map.is_free(next)) {
        state.pose.x = next.x;
        state.pose.y = next.y;
        state.path_length += map.cell_size();
        result.moved = true;
      } else {
        result.collided = true;
      }
      break;
    }
    case Action::kTurnLeft:
      state.pose.heading = turn_left(state.pose.heading);
      break;
    case Action::kTurnRight:
      state.pose.heading = turn_right(state.pose.heading);
      break;
    case Action::kStop:
      state.stopped = true;
      state.terminated = true;
      break;
  }
  ++state.steps;
  if (actor == Actor::kAgent) {
    ++state.agent_actions;
  } else {
    ++state.human_actions;
  }
  state.distance_history.push_back(state.goal_field->meters(state.pose.cell()));
  if (state.steps >= state.max_steps) state.terminated = true;
  return result;
}

bool within_success_radius(Cell a, Cell b) {
  const int dx = a.x - b.x;
  const int dy = a.y - b.y;
  return dx * dx + dy * dy < 4;
}

bool is_success(const EpisodeState& state) {
  return state.stopped && within_success_radius(state.pose.cell(), state.goal);
}

EpisodeSpec sample_episode(const GridMap& map, std::uint64_t seed,
                           double min_geodesic, int max_steps) {
  const std::vector<Cell> cells = map.free_cells();
  Rng rng(seed);
  for (int attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
    Cell start = cells[uniform_index(rng, cells.size())];
    Cell goal = cells[uniform_index(rng, cells.size())];
    auto heading = static_cast<Heading>(uniform_index(rng, 4));
    if (start == goal) continue;
    const double d = geodesic_distance(map, start, goal);
    if (d == kUnreachable || d < min_geodesic) continue;
    EpisodeSpec spec;
    spec.map_id = map.map_id();
    spec.start = {start.x, start.y, heading};
    spec.goal = goal;
    spec.shortest_path_length = d;
    spec.max_steps = max_steps;
    spec.seed = seed;
    return spec;
  }
  throw Error(ErrorCode::kNoFeasiblePair,
              "no start/goal pair with geodesic >= " +
                  std::to_string(min_geodesic) + " after " +
                  std::to_string(kMaxSampleAttempts) + " samples");
}

}  // namespace asknav
