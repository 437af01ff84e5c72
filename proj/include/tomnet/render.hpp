#pragma once

#include <optional>
#include <span>
#include <string>

#include "tomnet/planner.hpp"

namespace tomnet {

/// ASCII grid: '#' wall, '.' free, 'T' target, 'd' distractor, 'A' actor,
/// '*' earlier positions. The actor is drawn over objects, objects over
/// the trail.
std::string render_grid(const GridMap& map, const ObjectPlacement* placement,
                        std::optional<Position> actor,
                        std::span<const Position> trail);

/// The trajectory at step t (default: last step) with the path walked so far.
std::string render_trajectory(const GridMap& map, const Trajectory& traj,
                              int t = -1);

}  // namespace tomnet
