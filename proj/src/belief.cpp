#include "tomnet/belief.hpp"

#include <algorithm>
#include <cmath>

#include "tomnet/error.hpp"

namespace tomnet {

std::vector<int> BeliefDistribution::support() const {
  std::vector<int> out;
  for (int i = 0; i < kNumCells; ++i) {
    if (probs[i] > 0.0) out.push_back(i);
  }
  return out;
}

double BeliefDistribution::sum() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

BeliefDistribution init_belief(const GridMap& map, Position actor_start) {
  BeliefDistribution b;
  int count = 0;
  for (int i = 0; i < kNumCells; ++i) {
    Position p = Position::from_index(i);
    if (map.is_wall(p)) {
      b.excluded.set(i);
    } else if (p != actor_start) {
      ++count;
    }
  }
  // The actor would perceive an object under itself.
  b.excluded.set(actor_start.index());
  for (int i = 0; i < kNumCells; ++i) {
    b.probs[i] = b.excluded.test(i) ? 0.0 : 1.0 / count;
  }
  return b;
}

double coverage_likelihood(int m, int free_candidates, int distractors) {
  if (m == 0) return 1.0;
  if (free_candidates <= 0) return 0.0;
  double total = 0.0;
  double binom = 1.0;
  for (int j = 0; j <= m; ++j) {
    const double miss = 1.0 - static_cast<double>(j) / free_candidates;
    const double term = binom * std::pow(std::max(miss, 0.0), distractors);
    total += (j % 2 == 0) ? term : -term;
    binom = binom * (m - j) / (j + 1);
  }
  return std::max(total, 0.0);
}

namespace {

void renormalize(BeliefDistribution& b) {
  const double s = b.sum();
  if (!(s > 0.0)) {
    throw BeliefContradiction("observation leaves no admissible target cell");
  }
  for (double& p : b.probs) p /= s;
}

void set_delta(BeliefDistribution& b, Position c) {
  b.probs.fill(0.0);
  b.probs[c.index()] = 1.0;
  b.identified_target = c;
}

}  // namespace

BeliefDistribution update_belief(const BeliefDistribution& belief,
                                 const Observation& obs) {
  BeliefDistribution b = belief;
  auto is_identified_distractor = [&](Position p) {
    return std::find(b.identified_distractors.begin(),
                     b.identified_distractors.end(),
                     p) != b.identified_distractors.end();
  };

  for (const SeenCell& s : obs.seen) {
    if (s.content != Content::Empty) continue;
    if (b.identified_target == s.pos) {
      throw BeliefContradiction("identified target cell seen empty");
    }
    b.excluded.set(s.pos.index());
    b.probs[s.pos.index()] = 0.0;
  }

  for (const Revealed& r : obs.revealed) {
    if (r.identity != Identity::Distractor) continue;
    if (b.identified_target == r.pos) {
      throw BeliefContradiction("identified target revealed as distractor");
    }
    if (!is_identified_distractor(r.pos)) {
      b.identified_distractors.push_back(r.pos);
    }
    b.excluded.set(r.pos.index());
    b.probs[r.pos.index()] = 0.0;
  }

  for (const Revealed& r : obs.revealed) {
    if (r.identity != Identity::Target) continue;
    if (b.identified_target && *b.identified_target != r.pos) {
      throw BeliefContradiction("target revealed at a second cell");
    }
    if (b.excluded.test(r.pos.index())) {
      throw BeliefContradiction("target revealed on an excluded cell");
    }
    set_delta(b, r.pos);
  }

  if (b.is_delta()) {
    // Absorbing: mass stays on the identified cell.
    return b;
  }

  std::vector<int> sighted;
  for (const SeenCell& s : obs.seen) {
    if (s.content != Content::Object) continue;
    const bool revealed_now =
        std::any_of(obs.revealed.begin(), obs.revealed.end(),
                    [&](const Revealed& r) { return r.pos == s.pos; });
    if (revealed_now || is_identified_distractor(s.pos)) continue;
    sighted.push_back(s.pos.index());
  }

  if (!sighted.empty()) {
    int candidates = 0;
    for (int i = 0; i < kNumCells; ++i) {
      if (!b.excluded.test(i)) ++candidates;
    }
    const int d = b.remaining_distractors();
    const int m = static_cast<int>(sighted.size());
    const double on_sighted = coverage_likelihood(m - 1, candidates, d);
    const double elsewhere = coverage_likelihood(m, candidates, d);
    for (int i = 0; i < kNumCells; ++i) {
      if (b.excluded.test(i)) continue;
      const bool hit =
          std::find(sighted.begin(), sighted.end(), i) != sighted.end();
      b.probs[i] *= hit ? on_sighted : elsewhere;
    }
  }

  renormalize(b);
  return b;
}

Position argmax_belief(const BeliefDistribution& belief) {
  int best = 0;
  for (int i = 1; i < kNumCells; ++i) {
    if (belief.probs[i] > belief.probs[best]) best = i;
  }
  return Position::from_index(best);
}

}  // namespace tomnet
