#pragma once

// Independent oracles and fixtures shared by the unit and acceptance tests.
// Nothing here calls the library code it is used to check.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tomnet/datagen.hpp"
#include "tomnet/gridworld.hpp"
#include "tomnet/rng.hpp"
#include "tomnet/sps.hpp"

namespace testing {

using tomnet::GridMap;
using tomnet::Position;

/// Border walls plus every interior cell outside rows/cols [lo, hi].
GridMap open_box(int lo, int hi);

/// Connected free region of exactly `size` cells grown from a random
/// interior seed cell by 8-neighbour accretion.
GridMap random_region(std::uint64_t seed, int size);

/// Own BFS over the 8 moves, -1 for unreachable.
std::array<int, tomnet::kNumCells> oracle_bfs(const GridMap& map,
                                              Position source);

/// Grid step that ignores the library: move unless the destination is a
/// wall or off the grid.
Position oracle_move(const GridMap& map, Position p, int dr, int dc);

struct ToyWorld {
  GridMap map;
  Position start;
  Position target;
  std::vector<Position> distractors;
};

/// Observation as the actor perceives it from `pos`: explicit 5x5 window
/// and adjacency reveal.
tomnet::Observation oracle_observe(const ToyWorld& w, Position pos);

/// Posterior by enumerating every ordered distractor tuple over the
/// non-excluded cells.
struct EnumerationFilter {
  std::array<double, tomnet::kNumCells> probs{};
  std::set<int> excluded;
  std::set<int> known_distractors;
  std::optional<int> target;
  int total_distractors = 0;

  static EnumerationFilter start(const GridMap& map, Position actor,
                                 int distractors);
  void update(const tomnet::Observation& obs);
};

/// Random inputs and labels shaped like encoded samples.
std::vector<tomnet::EncodedSample> random_samples(std::uint64_t seed, int n);

struct GradCheckResult {
  double max_rel_error = 0.0;
  int coordinates = 0;
  int kinks = 0;      // step reductions forced by a kink near the point
  std::string worst;  // parameter name of the worst coordinate
};

/// Finite differences of the training-mode total loss against the analytic
/// gradient on a reduced-width network. Every parameter tensor contributes
/// `per_tensor` random coordinates. The step starts at h and is divided by 4
/// while a kink lies within it.
GradCheckResult gradient_check(tomnet::Variant v, std::uint64_t seed,
                               int per_tensor = 3, double h = 1e-3);

/// 32 samples spread over the trajectories of a small generated dataset.
std::vector<tomnet::EncodedSample> memorization_subset();

struct MemorizationResult {
  double accuracy = 0.0;  // percent, inference mode
  int epochs = 0;
};

/// Full-batch Adam on the subset until inference accuracy reaches
/// `goal` percent or `max_epochs` pass.
MemorizationResult memorize(tomnet::Variant v,
                            const std::vector<tomnet::EncodedSample>& subset,
                            int max_epochs, double goal = 99.0);

/// Two-sample fixtures with Welch t and two-sided p computed beforehand by
/// an independent statistics package.
struct WelchFixture {
  std::string name;
  std::vector<double> a, b;
  double t, p;
};
const std::vector<WelchFixture>& welch_fixtures();

/// Tiny dataset spec that builds in well under a second.
tomnet::DatasetSpec tiny_spec(int maps, int trajectories, int budget = 40,
                              std::uint64_t seed = 7);

/// Fresh directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

}  // namespace testing
