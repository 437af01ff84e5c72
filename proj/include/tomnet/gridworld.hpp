#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tomnet {

inline constexpr int kGridSize = 11;
inline constexpr int kNumCells = kGridSize * kGridSize;
inline constexpr int kNumActions = 9;
inline constexpr int kNumDistractors = 3;
inline constexpr int kViewRadius = 2;      // 5x5 field of view
inline constexpr int kIdentifyRadius = 1;  // identity disclosed on approach

struct Position {
  int row = 0;
  int col = 0;

  friend constexpr bool operator==(Position, Position) = default;
  friend constexpr auto operator<=>(Position, Position) = default;

  constexpr int index() const { return row * kGridSize + col; }
  static constexpr Position from_index(int idx) {
    return {idx / kGridSize, idx % kGridSize};
  }
  constexpr bool on_grid() const {
    return row >= 0 && row < kGridSize && col >= 0 && col < kGridSize;
  }
};

int chebyshev(Position a, Position b);

/// Ids are part of every on-disk format; do not reorder.
enum class Action : std::uint8_t {
  North = 0,
  East,
  South,
  West,
  NorthEast,
  NorthWest,
  SouthEast,
  SouthWest,
  Stay,
};

inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::North,     Action::East,      Action::South,
    Action::West,      Action::NorthEast, Action::NorthWest,
    Action::SouthEast, Action::SouthWest, Action::Stay};

constexpr int action_id(Action a) { return static_cast<int>(a); }
Action action_from_id(int id);
std::string_view action_name(Action a);
/// (d_row, d_col); north is row - 1.
std::pair<int, int> action_delta(Action a);

enum class Cell : std::uint8_t { Free = 0, Wall = 1 };

struct MapGenConfig {
  double wall_density = 0.12;  // interior cells, in [0, 0.35]
  int columns = 3;             // short wall segments, in [0, 8]
  friend bool operator==(const MapGenConfig&, const MapGenConfig&) = default;
};

class GridMap {
 public:
  GridMap();  // all interior free, border walls
  GridMap(std::array<Cell, kNumCells> cells, int map_id, std::uint64_t seed);

  bool is_wall(Position p) const;
  bool is_free(Position p) const { return !is_wall(p); }
  Cell at(Position p) const { return cells_[p.index()]; }
  void set(Position p, Cell c) { cells_[p.index()] = c; }

  std::vector<Position> free_cells() const;
  int free_count() const;
  int wall_count() const { return kNumCells - free_count(); }

  int id() const { return map_id_; }
  std::uint64_t gen_seed() const { return gen_seed_; }
  void set_id(int id) { map_id_ = id; }

  const std::array<Cell, kNumCells>& cells() const { return cells_; }

  /// `#` wall, `.` free, 11 lines of 11 characters.
  std::string to_text() const;
  static GridMap from_text(std::string_view text, int map_id = 0);

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  std::array<Cell, kNumCells> cells_{};
  int map_id_ = 0;
  std::uint64_t gen_seed_ = 0;
};

/// All-pairs BFS distances under 8-connected moves through free cells.
/// Unreachable pairs hold -1.
class DistanceTable {
 public:
  explicit DistanceTable(const GridMap& map);
  int operator()(Position a, Position b) const {
    return dist_[a.index() * kNumCells + b.index()];
  }

 private:
  std::vector<int> dist_;
};

std::vector<int> bfs_distances(const GridMap& map, Position source);
bool free_cells_connected(const GridMap& map);

GridMap generate_map(std::uint64_t gen_seed, const MapGenConfig& config,
                     int map_id = 0);

/// Blocked or off-grid moves leave the position unchanged.
Position apply_action(const GridMap& map, Position pos, Action a);

/// Cells within Chebyshev distance 2, clipped to the grid, row-major order.
std::vector<Position> field_of_view(Position pos);
bool in_view(Position observer, Position cell);

struct ObjectPlacement {
  Position target;
  std::array<Position, kNumDistractors> distractors;

  friend bool operator==(const ObjectPlacement&,
                         const ObjectPlacement&) = default;
  bool has_object(Position p) const;
};

enum class Content : std::uint8_t { Empty = 0, Object = 1 };
enum class Identity : std::uint8_t { Target = 0, Distractor = 1 };

struct SeenCell {
  Position pos;
  Content content;
  friend bool operator==(const SeenCell&, const SeenCell&) = default;
};

struct Revealed {
  Position pos;
  Identity identity;
  friend bool operator==(const Revealed&, const Revealed&) = default;
};

struct Observation {
  std::vector<SeenCell> seen;
  std::vector<Revealed> revealed;
  friend bool operator==(const Observation&, const Observation&) = default;
};

Observation observe(const GridMap& map, const ObjectPlacement& placement,
                    Position pos);

struct PlacementDraw {
  ObjectPlacement placement;
  Position actor_start;
};

PlacementDraw place_objects(const GridMap& map, std::uint64_t seed);

}  // namespace tomnet
