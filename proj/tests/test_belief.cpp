#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tomnet/belief.hpp"
#include "tomnet/error.hpp"

using namespace tomnet;
using testing::EnumerationFilter;
using testing::ToyWorld;

namespace {

void check_simplex(const BeliefDistribution& b) {
  double s = 0.0;
  int ones = 0;
  for (int i = 0; i < kNumCells; ++i) {
    CHECK(b.probs[i] >= 0.0);
    if (b.excluded.test(i)) CHECK(b.probs[i] == 0.0);
    if (b.probs[i] == 1.0) ++ones;
    s += b.probs[i];
  }
  CHECK(std::abs(s - 1.0) < 1e-9);
  CHECK(ones <= 1);
  for (Position d : b.identified_distractors) CHECK(b[d] == 0.0);
}

ToyWorld toy(std::uint64_t seed, int free_cells, int distractors) {
  Rng rng(seed);
  ToyWorld w;
  w.map = testing::random_region(seed, free_cells);
  auto free = w.map.free_cells();
  rng.shuffle(free);
  w.start = free[0];
  w.target = free[1];
  for (int i = 0; i < distractors; ++i) w.distractors.push_back(free[2 + i]);
  return w;
}

}  // namespace

TEST_CASE("prior is uniform off the start cell") {
  GridMap m = testing::random_region(4, 61);
  Position start = m.free_cells()[10];
  BeliefDistribution b = init_belief(m, start);
  for (int i = 0; i < kNumCells; ++i) {
    Position p = Position::from_index(i);
    if (m.is_wall(p) || p == start)
      CHECK(b.probs[i] == 0.0);
    else
      CHECK(b.probs[i] == doctest::Approx(1.0 / 60));
  }
  CHECK(b.sum() == doctest::Approx(1.0));
  GridMap renamed = m;
  renamed.set_id(99);
  CHECK(init_belief(renamed, start) == b);
}

TEST_CASE("empty sightings exclude and renormalize") {
  GridMap m = testing::random_region(5, 11);
  auto free = m.free_cells();
  BeliefDistribution b = init_belief(m, free[0]);  // 10 candidates
  Observation o;
  for (int i = 1; i <= 4; ++i) o.seen.push_back({free[i], Content::Empty});
  BeliefDistribution post = update_belief(b, o);
  for (int i = 5; i < 11; ++i) CHECK(post[free[i]] == doctest::Approx(1.0 / 6));
  for (int i = 1; i <= 4; ++i) CHECK(post.excluded.test(free[i].index()));
}

TEST_CASE("revealed target gives an absorbing delta") {
  GridMap m;
  BeliefDistribution b = init_belief(m, {5, 5});
  Observation o;
  o.seen.push_back({{5, 6}, Content::Object});
  o.revealed.push_back({{5, 6}, Identity::Target});
  BeliefDistribution d = update_belief(b, o);
  CHECK(d.is_delta());
  CHECK(d[{5, 6}] == 1.0);
  CHECK(d.sum() == 1.0);
  CHECK(argmax_belief(d) == Position{5, 6});

  Observation later;
  later.seen.push_back({{3, 3}, Content::Empty});
  later.seen.push_back({{3, 4}, Content::Object});
  CHECK(update_belief(d, later).probs == d.probs);

  Observation contradiction;
  contradiction.seen.push_back({{5, 6}, Content::Empty});
  CHECK_THROWS_AS(update_belief(d, contradiction), BeliefContradiction);
  Observation second;
  second.revealed.push_back({{7, 7}, Identity::Target});
  CHECK_THROWS_AS(update_belief(d, second), BeliefContradiction);
}

TEST_CASE("single sighting uses the closed form factor") {
  // 51 free cells, start excluded: F = 50, D = 3.
  GridMap m = testing::random_region(8, 51);
  auto free = m.free_cells();
  BeliefDistribution b = init_belief(m, free[0]);
  Observation o;
  o.seen.push_back({free[7], Content::Object});
  BeliefDistribution post = update_belief(b, o);
  const double q = 1.0 - std::pow(49.0 / 50.0, 3);
  CHECK(q == doctest::Approx(0.0588).epsilon(1e-3));
  CHECK(post[free[7]] / post[free[8]] == doctest::Approx(1.0 / q).epsilon(1e-12));
  CHECK(post[free[7]] / post[free[8]] == doctest::Approx(17.0).epsilon(0.01));
  check_simplex(post);
}

TEST_CASE("coverage likelihood matches direct counting") {
  for (int f = 1; f <= 6; ++f) {
    for (int d = 0; d <= 4; ++d) {
      for (int m = 0; m <= 3 && m <= f; ++m) {
        // Ordered d-tuples over f cells hitting the first m cells.
        long hit = 0, total = 0;
        std::vector<int> t(d, 0);
        while (true) {
          ++total;
          bool ok = true;
          for (int c = 0; c < m; ++c)
            ok = ok && std::find(t.begin(), t.end(), c) != t.end();
          hit += ok;
          int k = 0;
          while (k < d && ++t[k] == f) t[k++] = 0;
          if (k == d) break;
        }
        CHECK(coverage_likelihood(m, f, d) ==
              doctest::Approx(static_cast<double>(hit) / total).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("argmax breaks ties by lowest index") {
  BeliefDistribution b;
  b.probs[5] = b.probs[9] = b.probs[17] = 1.0 / 3;
  CHECK(argmax_belief(b).index() == 5);
}

TEST_CASE("filter matches brute-force enumeration on small maps") {
  // Random walks on 13-cell maps: 12 candidates once the start is excluded.
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int dcount = 1 + static_cast<int>(seed % 2);
    ToyWorld w = toy(seed, 13, dcount);
    BeliefDistribution b = init_belief(w.map, w.start);
    b.total_distractors = dcount;
    EnumerationFilter oracle = EnumerationFilter::start(w.map, w.start, dcount);
    Rng walk(seed + 1000);
    Position pos = w.start;
    for (int step = 0; step < 12; ++step) {
      Observation o = testing::oracle_observe(w, pos);
      b = update_belief(b, o);
      oracle.update(o);
      for (int i = 0; i < kNumCells; ++i)
        REQUIRE(std::abs(b.probs[i] - oracle.probs[i]) < 1e-9);
      check_simplex(b);
      CHECK(w.map.is_free(argmax_belief(b)));
      int dr = static_cast<int>(walk.uniform_index(3)) - 1;
      int dc = static_cast<int>(walk.uniform_index(3)) - 1;
      pos = testing::oracle_move(w.map, pos, dr, dc);
    }
  }
}

TEST_CASE("exclusion is monotone along trajectories") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    ToyWorld w = toy(seed, 40, 3);
    BeliefDistribution b = init_belief(w.map, w.start);
    Rng walk(seed);
    Position pos = w.start;
    for (int step = 0; step < 30; ++step) {
      auto before = b.excluded;
      b = update_belief(b, testing::oracle_observe(w, pos));
      CHECK((before & ~b.excluded).none());
      for (int i = 0; i < kNumCells; ++i)
        if (b.excluded.test(i)) CHECK(b.probs[i] == 0.0);
      check_simplex(b);
      CHECK(b[w.target] > 0.0);
      pos = testing::oracle_move(w.map, pos,
                                 static_cast<int>(walk.uniform_index(3)) - 1,
                                 static_cast<int>(walk.uniform_index(3)) - 1);
    }
  }
}
