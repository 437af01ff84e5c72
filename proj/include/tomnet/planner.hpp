#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "tomnet/belief.hpp"
#include "tomnet/gridworld.hpp"

namespace tomnet {

enum class RolloutPolicy : std::uint8_t {
  /// Uniform over non-blocked moves.
  Uniform = 0,
  /// Uniform over moves that lie on a shortest path to the sampled target.
  ShortestPath = 1,
};

struct PlannerConfig {
  int sample_budget = 250;
  double ucb_constant = 1.0;
  double discount = 0.95;
  int rollout_depth = 20;
  double step_reward = -0.01;
  double goal_reward = 1.0;
  int max_episode_steps = 100;
  std::uint64_t seed = 0;
  RolloutPolicy rollout = RolloutPolicy::ShortestPath;

  void validate() const;
  friend bool operator==(const PlannerConfig&, const PlannerConfig&) = default;
};

/// One node per action-observation history.
struct SearchNode {
  int visits = 0;
  std::array<int, kNumActions> action_visits{};
  std::array<double, kNumActions> q{};
  /// (observation key, child node index) per action.
  std::array<std::vector<std::pair<int, int>>, kNumActions> children;
};

struct SearchTree {
  std::vector<SearchNode> nodes;  // nodes[0] is the root
  Action best_action = Action::Stay;
};

/// Root-sampling Monte-Carlo tree search over the target hypothesis.
SearchTree search(const BeliefDistribution& belief, const GridMap& map,
                  const DistanceTable& dist, Position pos,
                  const PlannerConfig& cfg);

Action plan_action(const BeliefDistribution& belief, const GridMap& map,
                   Position pos, const PlannerConfig& cfg);
Action plan_action(const BeliefDistribution& belief, const GridMap& map,
                   const DistanceTable& dist, Position pos,
                   const PlannerConfig& cfg);

struct Step {
  int t = 0;
  Position pos;
  Action action = Action::Stay;  // chosen at pos after observing
  Observation obs;               // made at pos
  BeliefDistribution belief_after;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  int map_id = 0;
  int trajectory_id = 0;
  ObjectPlacement placement;
  Position start;
  std::vector<Step> steps;
  bool reached_target = false;
  /// Permutation mapping object planes to {target, d0, d1, d2}.
  std::array<std::uint8_t, 4> object_order{0, 1, 2, 3};

  int length() const { return static_cast<int>(steps.size()); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Plans, moves, observes and filters until the actor stands on the target
/// or the step limit is reached.
Trajectory run_episode(const GridMap& map, const ObjectPlacement& placement,
                       Position start, const PlannerConfig& cfg);
/// Same loop from a caller-provided prior instead of init_belief.
Trajectory run_episode(const GridMap& map, const ObjectPlacement& placement,
                       Position start, const PlannerConfig& cfg,
                       const BeliefDistribution& prior);

}  // namespace tomnet
