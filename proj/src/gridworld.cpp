#include "tomnet/gridworld.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <sstream>

#include "tomnet/error.hpp"
#include "tomnet/rng.hpp"

namespace tomnet {

int chebyshev(Position a, Position b) {
  return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

Action action_from_id(int id) {
  if (id < 0 || id >= kNumActions) {
    throw Error("action id out of range: " + std::to_string(id));
  }
  return static_cast<Action>(id);
}

std::string_view action_name(Action a) {
  static constexpr std::array<std::string_view, kNumActions> names = {
      "north",     "east",      "south",     "west", "northeast",
      "northwest", "southeast", "southwest", "stay"};
  return names[action_id(a)];
}

std::pair<int, int> action_delta(Action a) {
  switch (a) {
    case Action::North: return {-1, 0};
    case Action::East: return {0, 1};
    case Action::South: return {1, 0};
    case Action::West: return {0, -1};
    case Action::NorthEast: return {-1, 1};
    case Action::NorthWest: return {-1, -1};
    case Action::SouthEast: return {1, 1};
    case Action::SouthWest: return {1, -1};
    case Action::Stay: return {0, 0};
  }
  return {0, 0};
}

namespace {

bool on_border(Position p) {
  return p.row == 0 || p.col == 0 || p.row == kGridSize - 1 ||
         p.col == kGridSize - 1;
}

}  // namespace

GridMap::GridMap() {
  for (int i = 0; i < kNumCells; ++i) {
    cells_[i] = on_border(Position::from_index(i)) ? Cell::Wall : Cell::Free;
  }
}

GridMap::GridMap(std::array<Cell, kNumCells> cells, int map_id,
                 std::uint64_t seed)
    : cells_(cells), map_id_(map_id), gen_seed_(seed) {}

bool GridMap::is_wall(Position p) const {
  return !p.on_grid() || cells_[p.index()] == Cell::Wall;
}

std::vector<Position> GridMap::free_cells() const {
  std::vector<Position> out;
  for (int i = 0; i < kNumCells; ++i) {
    if (cells_[i] == Cell::Free) out.push_back(Position::from_index(i));
  }
  return out;
}

int GridMap::free_count() const {
  return static_cast<int>(
      std::count(cells_.begin(), cells_.end(), Cell::Free));
}

std::string GridMap::to_text() const {
  std::string out;
  out.reserve(kNumCells + kGridSize);
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      out.push_back(cells_[r * kGridSize + c] == Cell::Wall ? '#' : '.');
    }
    out.push_back('\n');
  }
  return out;
}

GridMap GridMap::from_text(std::string_view text, int map_id) {
  std::array<Cell, kNumCells> cells{};
  std::istringstream in{std::string(text)};
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row >= kGridSize || static_cast<int>(line.size()) != kGridSize) {
      throw FormatError("map text must be 11 lines of 11 characters");
    }
    for (int c = 0; c < kGridSize; ++c) {
      if (line[c] == '#') {
        cells[row * kGridSize + c] = Cell::Wall;
      } else if (line[c] == '.') {
        cells[row * kGridSize + c] = Cell::Free;
      } else {
        throw FormatError(std::string("unexpected map character '") +
                          line[c] + "'");
      }
    }
    ++row;
  }
  if (row != kGridSize) {
    throw FormatError("map text must be 11 lines of 11 characters");
  }
  return GridMap(cells, map_id, 0);
}

std::vector<int> bfs_distances(const GridMap& map, Position source) {
  std::vector<int> dist(kNumCells, -1);
  if (map.is_wall(source)) return dist;
  std::deque<Position> frontier{source};
  dist[source.index()] = 0;
  while (!frontier.empty()) {
    Position p = frontier.front();
    frontier.pop_front();
    for (Action a : kAllActions) {
      if (a == Action::Stay) continue;
      auto [dr, dc] = action_delta(a);
      Position q{p.row + dr, p.col + dc};
      if (map.is_wall(q) || dist[q.index()] >= 0) continue;
      dist[q.index()] = dist[p.index()] + 1;
      frontier.push_back(q);
    }
  }
  return dist;
}

DistanceTable::DistanceTable(const GridMap& map)
    : dist_(static_cast<std::size_t>(kNumCells) * kNumCells, -1) {
  for (int i = 0; i < kNumCells; ++i) {
    Position p = Position::from_index(i);
    if (map.is_wall(p)) continue;
    std::vector<int> row = bfs_distances(map, p);
    std::copy(row.begin(), row.end(), dist_.begin() + i * kNumCells);
  }
}

bool free_cells_connected(const GridMap& map) {
  std::vector<Position> free = map.free_cells();
  if (free.empty()) return false;
  std::vector<int> dist = bfs_distances(map, free.front());
  return std::all_of(free.begin(), free.end(),
                     [&](Position p) { return dist[p.index()] >= 0; });
}

GridMap generate_map(std::uint64_t gen_seed, const MapGenConfig& config,
                     int map_id) {
  if (config.wall_density < 0.0 || config.wall_density > 0.35) {
    throw MapGenerationError("wall density must lie in [0, 0.35]");
  }
  if (config.columns < 0 || config.columns > 8) {
    throw MapGenerationError("column count must lie in [0, 8]");
  }
  Rng rng(gen_seed);
  constexpr int kMaxAttempts = 1000;
  constexpr int kInterior = kGridSize - 2;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    GridMap map;
    for (int r = 1; r <= kInterior; ++r) {
      for (int c = 1; c <= kInterior; ++c) {
        if (rng.uniform01() < config.wall_density) {
          map.set({r, c}, Cell::Wall);
        }
      }
    }
    for (int k = 0; k < config.columns; ++k) {
      const int length = 2 + static_cast<int>(rng.uniform_index(2));
      const bool vertical = rng.uniform_index(2) == 0;
      int r = 1 + static_cast<int>(rng.uniform_index(kInterior));
      int c = 1 + static_cast<int>(rng.uniform_index(kInterior));
      for (int s = 0; s < length; ++s) {
        Position p{r + (vertical ? s : 0), c + (vertical ? 0 : s)};
        if (p.row >= 1 && p.row <= kInterior && p.col >= 1 &&
            p.col <= kInterior) {
          map.set(p, Cell::Wall);
        }
      }
    }
    if (map.free_count() >= 5 && free_cells_connected(map)) {
      return GridMap(map.cells(), map_id, gen_seed);
    }
  }
  throw MapGenerationError("no connected map after 1000 attempts");
}

Position apply_action(const GridMap& map, Position pos, Action a) {
  auto [dr, dc] = action_delta(a);
  Position next{pos.row + dr, pos.col + dc};
  return map.is_wall(next) ? pos : next;
}

std::vector<Position> field_of_view(Position pos) {
  std::vector<Position> out;
  out.reserve(25);
  for (int r = pos.row - kViewRadius; r <= pos.row + kViewRadius; ++r) {
    for (int c = pos.col - kViewRadius; c <= pos.col + kViewRadius; ++c) {
      Position p{r, c};
      if (p.on_grid()) out.push_back(p);
    }
  }
  return out;
}

bool in_view(Position observer, Position cell) {
  return cell.on_grid() && chebyshev(observer, cell) <= kViewRadius;
}

bool ObjectPlacement::has_object(Position p) const {
  return target == p ||
         std::find(distractors.begin(), distractors.end(), p) !=
             distractors.end();
}

Observation observe(const GridMap& map, const ObjectPlacement& placement,
                    Position pos) {
  (void)map;  // visibility is window-based, walls do not occlude
  Observation obs;
  for (Position p : field_of_view(pos)) {
    const bool object = placement.has_object(p);
    obs.seen.push_back({p, object ? Content::Object : Content::Empty});
    if (object && chebyshev(pos, p) <= kIdentifyRadius) {
      obs.revealed.push_back(
          {p, p == placement.target ? Identity::Target : Identity::Distractor});
    }
  }
  return obs;
}

PlacementDraw place_objects(const GridMap& map, std::uint64_t seed) {
  std::vector<Position> free = map.free_cells();
  if (free.size() < 5) {
    throw PlacementError("placement needs at least 5 free cells");
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first five slots are a uniform draw without
  // replacement.
  for (std::size_t i = 0; i < 5; ++i) {
    std::size_t j = i + rng.uniform_index(free.size() - i);
    std::swap(free[i], free[j]);
  }
  PlacementDraw draw;
  draw.placement.target = free[0];
  draw.placement.distractors = {free[1], free[2], free[3]};
  draw.actor_start = free[4];
  return draw;
}

}  // namespace tomnet
