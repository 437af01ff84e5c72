#include "tomnet/conditions.hpp"

#include <algorithm>

#include "tomnet/error.hpp"
#include "tomnet/rng.hpp"

namespace tomnet {

ConditionFlags classify_sample(const Trajectory& traj, int t) {
  if (t < 0 || t >= traj.length()) throw Error("sample index out of range");
  ConditionFlags flags;
  std::array<bool, kNumDistractors> seen{};
  for (int s = 0; s <= t; ++s) {
    const Position pos = traj.steps[s].pos;
    if (in_view(pos, traj.placement.target)) flags.target_hidden = false;
    if (chebyshev(pos, traj.placement.target) <= kIdentifyRadius) {
      flags.target_identified = true;
    }
    for (int d = 0; d < kNumDistractors; ++d) {
      if (chebyshev(pos, traj.placement.distractors[d]) <= kIdentifyRadius) {
        seen[d] = true;
      }
    }
  }
  flags.neglected = static_cast<int>(std::count(seen.begin(), seen.end(), true));
  return flags;
}

bool on_shortest_path(const DistanceTable& dist, Position a, Position b,
                      Position cell) {
  const int ab = dist(a, b);
  const int ac = dist(a, cell);
  const int cb = dist(cell, b);
  return ab >= 0 && ac >= 0 && cb >= 0 && ac + cb == ab;
}

PlacementDraw make_aligned_trials(const GridMap& map, int k,
                                  std::uint64_t seed) {
  if (k < 0 || k > kNumDistractors) {
    throw PlacementError("aligned count must lie in [0, 3]");
  }
  if (k == 0) return place_objects(map, seed);
  const std::vector<Position> free = map.free_cells();
  if (free.size() < 5) throw PlacementError("placement needs 5 free cells");
  const DistanceTable dist(map);
  Rng rng(seed);
  constexpr int kMaxDraws = 1000;
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    const Position start = free[rng.uniform_index(free.size())];
    const Position target = free[rng.uniform_index(free.size())];
    const int d = dist(start, target);
    if (start == target || d < k + 1) continue;

    // Random shortest path: walk from start, choosing uniformly among
    // neighbours one step closer to the target.
    std::vector<Position> path{start};
    Position cur = start;
    while (cur != target) {
      std::vector<Position> next;
      for (Action a : kAllActions) {
        Position q = apply_action(map, cur, a);
        if (q != cur && dist(q, target) == dist(cur, target) - 1) {
          next.push_back(q);
        }
      }
      cur = next[rng.uniform_index(next.size())];
      path.push_back(cur);
    }
    std::vector<Position> interior(path.begin() + 1, path.end() - 1);
    rng.shuffle(interior);

    std::vector<Position> off_path;
    for (Position p : free) {
      if (p != start && p != target &&
          !on_shortest_path(dist, start, target, p)) {
        off_path.push_back(p);
      }
    }
    const std::size_t rest = static_cast<std::size_t>(kNumDistractors - k);
    if (off_path.size() < rest) continue;
    for (std::size_t i = 0; i < rest; ++i) {
      std::size_t j = i + rng.uniform_index(off_path.size() - i);
      std::swap(off_path[i], off_path[j]);
    }

    PlacementDraw out;
    out.actor_start = start;
    out.placement.target = target;
    for (int i = 0; i < k; ++i) out.placement.distractors[i] = interior[i];
    for (std::size_t i = 0; i < rest; ++i) {
      out.placement.distractors[k + i] = off_path[i];
    }
    return out;
  }
  throw PlacementError("no feasible aligned placement after 1000 draws");
}

}  // namespace tomnet
