#pragma once

#include <array>
#include <bitset>
#include <optional>
#include <vector>

#include "tomnet/gridworld.hpp"

namespace tomnet {

/// Posterior over the target cell, maintained by an exact discrete filter.
///
/// Unidentified object sightings are scored under a model where each
/// not-yet-identified distractor sits independently and uniformly on one of
/// the F non-excluded cells. For a single sighting this gives the familiar
/// factor q = 1 - (1 - 1/F)^D on every cell other than the sighted one.
struct BeliefDistribution {
  std::array<double, kNumCells> probs{};
  std::bitset<kNumCells> excluded;
  std::vector<Position> identified_distractors;
  std::optional<Position> identified_target;
  int total_distractors = kNumDistractors;

  double operator[](Position p) const { return probs[p.index()]; }
  int remaining_distractors() const {
    return total_distractors - static_cast<int>(identified_distractors.size());
  }
  bool is_delta() const { return identified_target.has_value(); }
  /// Cells with strictly positive mass, row-major.
  std::vector<int> support() const;
  double sum() const;

  friend bool operator==(const BeliefDistribution&,
                         const BeliefDistribution&) = default;
};

BeliefDistribution init_belief(const GridMap& map, Position actor_start);

/// Probability that D independent uniform draws over F cells cover a given
/// set of m cells (inclusion-exclusion).
double coverage_likelihood(int m, int free_candidates, int distractors);

/// Throws BeliefContradiction if the observation is inconsistent with an
/// identified target or leaves no mass anywhere.
BeliefDistribution update_belief(const BeliefDistribution& belief,
                                 const Observation& obs);

/// Ties go to the lowest row-major index.
Position argmax_belief(const BeliefDistribution& belief);

}  // namespace tomnet
