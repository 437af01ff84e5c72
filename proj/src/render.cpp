#include "tomnet/render.hpp"

#include <sstream>

#include "tomnet/error.hpp"

namespace tomnet {

std::string render_grid(const GridMap& map, const ObjectPlacement* placement,
                        std::optional<Position> actor,
                        std::span<const Position> trail) {
  std::string cells(kNumCells, '.');
  for (int i = 0; i < kNumCells; ++i) {
    if (map.is_wall(Position::from_index(i))) cells[i] = '#';
  }
  for (Position p : trail) cells[p.index()] = '*';
  if (placement) {
    for (Position d : placement->distractors) cells[d.index()] = 'd';
    cells[placement->target.index()] = 'T';
  }
  if (actor) cells[actor->index()] = 'A';
  std::string out;
  for (int r = 0; r < kGridSize; ++r) {
    out.append(cells, static_cast<std::size_t>(r) * kGridSize, kGridSize);
    out.push_back('\n');
  }
  return out;
}

std::string render_trajectory(const GridMap& map, const Trajectory& traj,
                              int t) {
  if (traj.steps.empty()) throw Error("cannot render an empty trajectory");
  if (t < 0) t = traj.length() - 1;
  if (t >= traj.length()) throw Error("render step beyond trajectory end");
  std::vector<Position> trail;
  for (int i = 0; i < t; ++i) trail.push_back(traj.steps[i].pos);
  std::ostringstream os;
  os << "map " << traj.map_id << " trajectory " << traj.trajectory_id
     << " step " << t << "/" << traj.length() - 1
     << (traj.reached_target ? " (target reached)" : "") << "\n";
  os << render_grid(map, &traj.placement, traj.steps[t].pos, trail);
  return os.str();
}

}  // namespace tomnet
