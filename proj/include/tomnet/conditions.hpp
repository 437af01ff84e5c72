#pragma once

#include "tomnet/planner.hpp"

namespace tomnet {

/// Visibility and neglect state of a trajectory prefix steps[0..t].
struct ConditionFlags {
  /// The target cell never entered the actor's field of view.
  bool target_hidden = true;
  /// Distractors whose identity has been revealed.
  int neglected = 0;
  /// Target identity revealed by approach.
  bool target_identified = false;

  friend bool operator==(const ConditionFlags&,
                         const ConditionFlags&) = default;
};

ConditionFlags classify_sample(const Trajectory& traj, int t);

/// Start, target and distractors with k distractors on distinct interior
/// cells of one BFS shortest start-target path and the rest off every
/// shortest path; k = 0 is plain random placement. Throws PlacementError after 1000 infeasible draws.
PlacementDraw make_aligned_trials(const GridMap& map, int k,
                                  std::uint64_t seed);

/// True if cell lies on some shortest path between a and b.
bool on_shortest_path(const DistanceTable& dist, Position a, Position b,
                      Position cell);

}  // namespace tomnet
