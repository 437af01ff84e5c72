#include "tomnet/planner.hpp"

#include <cmath>
#include <limits>

#include "tomnet/error.hpp"
#include "tomnet/rng.hpp"

namespace tomnet {

void PlannerConfig::validate() const {
  if (sample_budget < 1) throw Error("sample_budget must be >= 1");
  if (!(discount > 0.0 && discount < 1.0)) {
    throw Error("discount must lie in (0, 1)");
  }
  if (max_episode_steps < 1) throw Error("max_episode_steps must be >= 1");
  if (rollout_depth < 0) throw Error("rollout_depth must be >= 0");
}

namespace {

constexpr int kNotFound = -1;

struct SimState {
  Position pos;
  Position target;
  bool found = false;
};

class TreeSearch {
 public:
  TreeSearch(const GridMap& map, const DistanceTable& dist,
             const PlannerConfig& cfg)
      : map_(map), dist_(dist), cfg_(cfg), rng_(cfg.seed) {}

  SearchTree run(const BeliefDistribution& belief, Position pos) {
    std::vector<int> support = belief.support();
    if (support.empty()) throw PlanningError("belief has empty support");
    cumulative_.clear();
    double acc = 0.0;
    for (int idx : support) {
      acc += belief.probs[idx];
      cumulative_.push_back(acc);
    }
    support_ = std::move(support);

    tree_.nodes.clear();
    tree_.nodes.emplace_back();
    for (int i = 0; i < cfg_.sample_budget; ++i) {
      SimState s{pos, Position::from_index(sample_target())};
      s.found = chebyshev(s.pos, s.target) <= kIdentifyRadius;
      simulate(0, s, 0);
    }

    const SearchNode& root = tree_.nodes[0];
    int best = action_id(Action::Stay);
    int best_visits = -1;
    for (int a = 0; a < kNumActions; ++a) {
      if (root.action_visits[a] > best_visits) {
        best_visits = root.action_visits[a];
        best = a;
      }
    }
    tree_.best_action = action_from_id(best);
    return std::move(tree_);
  }

 private:
  int sample_target() {
    const double u = rng_.uniform01() * cumulative_.back();
    for (std::size_t i = 0; i < cumulative_.size(); ++i) {
      if (u < cumulative_[i]) return support_[i];
    }
    return support_.back();
  }

  bool admissible(Position pos, Action a) const {
    return a == Action::Stay || apply_action(map_, pos, a) != pos;
  }

  int observation_key(const SimState& s) const {
    return s.found ? s.target.index() : kNotFound;
  }

  /// Applies a, returning the immediate reward; sets terminal on arrival.
  double step(SimState& s, Action a, bool& terminal) const {
    s.pos = apply_action(map_, s.pos, a);
    if (chebyshev(s.pos, s.target) <= kIdentifyRadius) s.found = true;
    terminal = s.pos == s.target;
    return cfg_.step_reward + (terminal ? cfg_.goal_reward : 0.0);
  }

  int select_action(const SearchNode& node, Position pos) const {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    const double log_n = std::log(static_cast<double>(std::max(node.visits, 1)));
    for (int a = 0; a < kNumActions; ++a) {
      if (!admissible(pos, action_from_id(a))) continue;
      if (node.action_visits[a] == 0) return a;
      const double score =
          node.q[a] +
          cfg_.ucb_constant * std::sqrt(log_n / node.action_visits[a]);
      if (score > best_score) {
        best_score = score;
        best = a;
      }
    }
    return best;
  }

  Action rollout_action(const SimState& s) {
    std::array<Action, kNumActions> options{};
    int n = 0;
    const int here = dist_(s.pos, s.target);
    for (Action a : kAllActions) {
      if (a == Action::Stay) continue;
      Position next = apply_action(map_, s.pos, a);
      if (next == s.pos) continue;
      if (cfg_.rollout == RolloutPolicy::ShortestPath &&
          dist_(next, s.target) != here - 1) {
        continue;
      }
      options[n++] = a;
    }
    if (n == 0) return Action::Stay;
    return options[rng_.uniform_index(static_cast<std::size_t>(n))];
  }

  double rollout(SimState s) {
    double ret = 0.0;
    double scale = 1.0;
    for (int d = 0; d < cfg_.rollout_depth; ++d) {
      bool terminal = false;
      ret += scale * step(s, rollout_action(s), terminal);
      if (terminal) break;
      scale *= cfg_.discount;
    }
    return ret;
  }

  double simulate(int node_idx, SimState s, int depth) {
    if (depth >= cfg_.max_episode_steps) return 0.0;
    const int a = select_action(tree_.nodes[node_idx], s.pos);
    bool terminal = false;
    double ret = step(s, action_from_id(a), terminal);
    if (!terminal) {
      const int key = observation_key(s);
      int child = -1;
      for (const auto& [k, idx] : tree_.nodes[node_idx].children[a]) {
        if (k == key) {
          child = idx;
          break;
        }
      }
      if (child < 0) {
        child = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        tree_.nodes[node_idx].children[a].emplace_back(key, child);
        ret += cfg_.discount * rollout(s);
      } else {
        ret += cfg_.discount * simulate(child, s, depth + 1);
      }
    }
    SearchNode& node = tree_.nodes[node_idx];
    node.visits += 1;
    node.action_visits[a] += 1;
    node.q[a] += (ret - node.q[a]) / node.action_visits[a];
    return ret;
  }

  const GridMap& map_;
  const DistanceTable& dist_;
  const PlannerConfig& cfg_;
  Rng rng_;
  std::vector<int> support_;
  std::vector<double> cumulative_;
  SearchTree tree_;
};

}  // namespace

SearchTree search(const BeliefDistribution& belief, const GridMap& map,
                  const DistanceTable& dist, Position pos,
                  const PlannerConfig& cfg) {
  cfg.validate();
  TreeSearch ts(map, dist, cfg);
  return ts.run(belief, pos);
}

Action plan_action(const BeliefDistribution& belief, const GridMap& map,
                   const DistanceTable& dist, Position pos,
                   const PlannerConfig& cfg) {
  return search(belief, map, dist, pos, cfg).best_action;
}

Action plan_action(const BeliefDistribution& belief, const GridMap& map,
                   Position pos, const PlannerConfig& cfg) {
  DistanceTable dist(map);
  return plan_action(belief, map, dist, pos, cfg);
}

Trajectory run_episode(const GridMap& map, const ObjectPlacement& placement,
                       Position start, const PlannerConfig& cfg) {
  return run_episode(map, placement, start, cfg, init_belief(map, start));
}

Trajectory run_episode(const GridMap& map, const ObjectPlacement& placement,
                       Position start, const PlannerConfig& cfg,
                       const BeliefDistribution& prior) {
  cfg.validate();
  DistanceTable dist(map);
  Trajectory traj;
  traj.map_id = map.id();
  traj.placement = placement;
  traj.start = start;

  BeliefDistribution belief = prior;
  Position pos = start;
  for (int t = 0; t < cfg.max_episode_steps; ++t) {
    Step st;
    st.t = t;
    st.pos = pos;
    st.obs = observe(map, placement, pos);
    belief = update_belief(belief, st.obs);
    st.belief_after = belief;
    if (pos == placement.target) {
      st.action = Action::Stay;
      traj.steps.push_back(std::move(st));
      traj.reached_target = true;
      break;
    }
    PlannerConfig step_cfg = cfg;
    step_cfg.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(t)});
    st.action = plan_action(belief, map, dist, pos, step_cfg);
    pos = apply_action(map, pos, st.action);
    traj.steps.push_back(std::move(st));
  }
  return traj;
}

}  // namespace tomnet
