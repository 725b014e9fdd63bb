#include "asknav/suites.hpp"

#include <algorithm>

#include "asknav/error.hpp"
#include "asknav/rng.hpp"

namespace asknav {

const std::vector<Fixture>& fixtures() {
  static const std::vector<Fixture> kFixtures = {
      {"open3",
       "...\n"
       "...\n"
       "...\n"},
      {"ring5",
       "#####\n"
       "#...#\n"
       "#...#\n"
       "#...#\n"
       "#####\n"},
      {"detour5",
       ".....\n"
       "####.\n"
       ".....\n"
       ".####\n"
       ".....\n"},
      {"corridor_l",
       "#######\n"
       "#.....#\n"
       "#####.#\n"
       "#####.#\n"
       "#####.#\n"
       "#######\n"},
      {"open10",
       "..........\n"
       "..........\n"
       "..........\n"
       "..........\n"
       "..........\n"
       "..........\n"
       "..........\n"
       "..........\n"
       "..........\n"
       "..........\n"},
      {"block10",
       "..........\n"
       "..........\n"
       "..........\n"
       "...####...\n"
       "...####...\n"
       "...####...\n"
       "..........\n"
       "..........\n"
       "..........\n"
       "..........\n"},
      {"pillars10",
       "..........\n"
       "..........\n"
       "..##......\n"
       "..##......\n"
       "......##..\n"
       "......##..\n"
       "..........\n"
       "...#......\n"
       "..........\n"
       "..........\n"},
      {"trap12",
       "............\n"
       "............\n"
       "............\n"
       "...######...\n"
       "...#....#...\n"
       "...#....#...\n"
       "...#....#...\n"
       "............\n"
       "............\n"
       "............\n"
       "............\n"
       "............\n"},
  };
  return kFixtures;
}

GridMap fixture_map(const std::string& name) {
  for (const Fixture& f : fixtures()) {
    if (f.name == name) return load_map(f.text, f.name);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown fixture " + name);
}

std::vector<std::string> convex_fixture_names() {
  return {"open3", "ring5", "open10", "block10", "pillars10"};
}

std::vector<EpisodeSpec> trap_fixture_episodes() {
  const GridMap map = fixture_map("trap12");
  std::vector<EpisodeSpec> out;
  const Cell goals[] = {{5, 1}, {6, 1}};
  const Cell starts[] = {{5, 9}, {6, 9}, {5, 8}, {6, 10}};
  std::uint64_t seed = 0;
  for (Cell g : goals) {
    for (Cell s : starts) {
      EpisodeSpec e;
      e.map_id = map.map_id();
      e.start = {s.x, s.y, Heading::kNorth};
      e.goal = g;
      e.shortest_path_length = geodesic_distance(map, s, g);
      e.seed = seed++;
      out.push_back(e);
    }
  }
  return out;
}

MapSet Suite::map_set() const {
  MapSet set;
  for (const GridMap& m : maps) set.emplace(m.map_id(), m);
  return set;
}

namespace {

struct Rect {
  int x0, y0, x1, y1;  // inclusive
};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), blocked_(static_cast<std::size_t>(w * h), 0) {}

  void fill(const Rect& r) {
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) set(x, y);
    }
  }
  void set(int x, int y) { blocked_[static_cast<std::size_t>(y * w_ + x)] = 1; }

  // Rotates the square canvas a quarter turn clockwise `turns` times.
  void rotate(int turns) {
    for (int t = 0; t < turns; ++t) {
      std::vector<std::uint8_t> next(blocked_.size(), 0);
      for (int y = 0; y < h_; ++y) {
        for (int x = 0; x < w_; ++x) {
          const Cell c = rotate_cell({x, y}, 1);
          next[static_cast<std::size_t>(c.y * w_ + c.x)] =
              blocked_[static_cast<std::size_t>(y * w_ + x)];
        }
      }
      blocked_ = std::move(next);
    }
  }

  Cell rotate_cell(Cell c, int turns) const {
    for (int t = 0; t < turns; ++t) c = {w_ - 1 - c.y, c.x};
    return c;
  }

  GridMap to_map(std::string id) const {
    return GridMap(w_, h_, blocked_, 0.1, std::move(id));
  }

 private:
  int w_;
  int h_;
  std::vector<std::uint8_t> blocked_;
};

Heading rotate_heading(Heading h, int turns) {
  for (int t = 0; t < turns; ++t) h = turn_right(h);
  return h;
}

bool separated(const Rect& a, const Rect& b, int gap) {
  return a.x1 + gap < b.x0 || b.x1 + gap < a.x0 || a.y1 + gap < b.y0 ||
         b.y1 + gap < a.y0;
}

int rand_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
}

// Adds up to `count` rectangles at least two cells from the border and from
// every rectangle already in `placed`.
void scatter_blocks(Canvas& canvas, std::vector<Rect>& placed, int count, int w,
                    int h, Rng& rng) {
  int added = 0;
  for (int attempt = 0; attempt < 200 && added < count; ++attempt) {
    const int bw = rand_int(rng, 1, 3);
    const int bh = rand_int(rng, 1, 3);
    const int x0 = rand_int(rng, 2, w - 3 - bw);
    const int y0 = rand_int(rng, 2, h - 3 - bh);
    const Rect r{x0, y0, x0 + bw - 1, y0 + bh - 1};
    if (!std::all_of(placed.begin(), placed.end(),
                     [&](const Rect& o) { return separated(r, o, 2); })) {
      continue;
    }
    placed.push_back(r);
    canvas.fill(r);
    ++added;
  }
}

}  // namespace

Suite generate_suite(const SuiteConfig& config) {
  if (config.width != config.height || config.width < 12) {
    throw Error(ErrorCode::kInvalidArgument, "suite maps must be square, >= 12");
  }
  const int n = config.width;
  Suite suite;
  Rng rng(config.seed);
  char id[64];

  for (int i = 0; i < config.obstacle_maps; ++i) {
    Canvas canvas(n, n);
    std::vector<Rect> placed;
    scatter_blocks(canvas, placed, rand_int(rng, 3, 6), n, n, rng);
    std::snprintf(id, sizeof(id), "%s_obs_%02d", config.prefix.c_str(), i);
    GridMap map = canvas.to_map(id);
    for (int e = 0; e < config.episodes_per_obstacle_map; ++e) {
      suite.episodes.push_back(
          sample_episode(map, rng(), config.min_geodesic, config.max_steps));
    }
    suite.maps.push_back(std::move(map));
  }

  for (int i = 0; i < config.trap_maps; ++i) {
    const int width = rand_int(rng, 5, 7);
    const int depth = rand_int(rng, 3, 5);
    const int r0 = rand_int(rng, 3, n - depth - 4);
    const int c0 = rand_int(rng, 2, n - width - 2);
    Canvas canvas(n, n);
    const Rect back{c0, r0, c0 + width - 1, r0};
    canvas.fill(back);
    canvas.fill({c0, r0, c0, r0 + depth - 1});
    canvas.fill({c0 + width - 1, r0, c0 + width - 1, r0 + depth - 1});
    const Rect pocket{c0 - 1, r0 - 4, c0 + width, n - 1};
    std::vector<Rect> placed{pocket};
    scatter_blocks(canvas, placed, rand_int(rng, 0, 2), n, n, rng);
    const int turns = static_cast<int>(uniform_index(rng, 4));
    canvas.rotate(turns);
    std::snprintf(id, sizeof(id), "%s_trap_%02d", config.prefix.c_str(), i);
    GridMap map = canvas.to_map(id);
    for (int e = 0; e < config.episodes_per_trap_map; ++e) {
      const Cell goal{rand_int(rng, c0 + 1, c0 + width - 2), r0 - rand_int(rng, 2, 3)};
      const int start_row = std::min(n - 1, r0 + depth + rand_int(rng, 1, 3));
      const Cell start{rand_int(rng, c0 + 1, c0 + width - 2), start_row};
      const Cell g = canvas.rotate_cell(goal, turns);
      const Cell s = canvas.rotate_cell(start, turns);
      EpisodeSpec spec;
      spec.map_id = map.map_id();
      spec.start = {s.x, s.y, rotate_heading(Heading::kNorth, turns)};
      spec.goal = g;
      spec.shortest_path_length = geodesic_distance(map, s, g);
      spec.max_steps = config.max_steps;
      spec.seed = rng();
      suite.episodes.push_back(spec);
    }
    suite.maps.push_back(std::move(map));
  }
  return suite;
}

bool is_trap_map(const std::string& map_id) {
  return map_id.find("trap") != std::string::npos;
}

std::vector<EpisodeSpec> demo_episodes(std::span<const EpisodeSpec> episodes,
                                       int count) {
  const int traps = count / 2;
  std::vector<EpisodeSpec> trap_eps;
  std::vector<EpisodeSpec> other_eps;
  for (const EpisodeSpec& e : episodes) {
    (is_trap_map(e.map_id) ? trap_eps : other_eps).push_back(e);
  }
  std::vector<EpisodeSpec> out;
  for (int i = 0; i < traps && i < static_cast<int>(trap_eps.size()); ++i) {
    out.push_back(trap_eps[static_cast<std::size_t>(i)]);
  }
  for (std::size_t i = 0; i < other_eps.size() && static_cast<int>(out.size()) < count; ++i) {
    out.push_back(other_eps[i]);
  }
  for (std::size_t i = static_cast<std::size_t>(traps);
       i < trap_eps.size() && static_cast<int>(out.size()) < count; ++i) {
    out.push_back(trap_eps[i]);
  }
  return out;
}

SuiteConfig training_suite_config(std::uint64_t seed) {
  SuiteConfig c;
  c.prefix = "train";
  c.obstacle_maps = 24;
  c.trap_maps = 24;
  c.episodes_per_obstacle_map = 6;
  c.episodes_per_trap_map = 4;
  c.seed = seed;
  return c;
}

SuiteConfig validation_suite_config(std::uint64_t seed) {
  SuiteConfig c;
  c.prefix = "val";
  c.obstacle_maps = 12;
  c.trap_maps = 12;
  c.episodes_per_obstacle_map = 3;
  c.episodes_per_trap_map = 2;
  c.seed = seed;
  return c;
}

}  // namespace asknav
