#include "support.hpp"

#include <algorithm>
#include <deque>
#include <functional>

#include "tomnet/train.hpp"

namespace testing {

using namespace tomnet;

GridMap open_box(int lo, int hi) {
  GridMap map;
  for (int r = 1; r < kGridSize - 1; ++r) {
    for (int c = 1; c < kGridSize - 1; ++c) {
      const bool inside = r >= lo && r <= hi && c >= lo && c <= hi;
      map.set({r, c}, inside ? Cell::Free : Cell::Wall);
    }
  }
  return map;
}

GridMap random_region(std::uint64_t seed, int size) {
  Rng rng(seed);
  GridMap map;
  for (int r = 1; r < kGridSize - 1; ++r) {
    for (int c = 1; c < kGridSize - 1; ++c) map.set({r, c}, Cell::Wall);
  }
  std::vector<Position> region{
      {1 + static_cast<int>(rng.uniform_index(9)),
       1 + static_cast<int>(rng.uniform_index(9))}};
  map.set(region[0], Cell::Free);
  while (static_cast<int>(region.size()) < size) {
    std::vector<Position> frontier;
    for (Position p : region) {
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          Position q{p.row + dr, p.col + dc};
          if (q.row < 1 || q.row > 9 || q.col < 1 || q.col > 9) continue;
          if (map.at(q) == Cell::Free) continue;
          if (std::find(frontier.begin(), frontier.end(), q) == frontier.end())
            frontier.push_back(q);
        }
      }
    }
    Position pick = frontier[rng.uniform_index(frontier.size())];
    map.set(pick, Cell::Free);
    region.push_back(pick);
  }
  return map;
}

Position oracle_move(const GridMap& map, Position p, int dr, int dc) {
  Position q{p.row + dr, p.col + dc};
  if (q.row < 0 || q.row >= kGridSize || q.col < 0 || q.col >= kGridSize)
    return p;
  return map.cells()[q.row * kGridSize + q.col] == Cell::Wall ? p : q;
}

std::array<int, kNumCells> oracle_bfs(const GridMap& map, Position source) {
  std::array<int, kNumCells> d;
  d.fill(-1);
  std::deque<Position> queue{source};
  d[source.row * kGridSize + source.col] = 0;
  while (!queue.empty()) {
    Position p = queue.front();
    queue.pop_front();
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        Position q = oracle_move(map, p, dr, dc);
        int qi = q.row * kGridSize + q.col;
        if (d[qi] >= 0) continue;
        d[qi] = d[p.row * kGridSize + p.col] + 1;
        queue.push_back(q);
      }
    }
  }
  return d;
}

Observation oracle_observe(const ToyWorld& w, Position pos) {
  Observation obs;
  for (int r = pos.row - 2; r <= pos.row + 2; ++r) {
    for (int c = pos.col - 2; c <= pos.col + 2; ++c) {
      if (r < 0 || r >= kGridSize || c < 0 || c >= kGridSize) continue;
      Position p{r, c};
      bool is_target = p == w.target;
      bool is_distractor = std::find(w.distractors.begin(), w.distractors.end(),
                                     p) != w.distractors.end();
      bool object = is_target || is_distractor;
      obs.seen.push_back({p, object ? Content::Object : Content::Empty});
      if (object && std::abs(r - pos.row) <= 1 && std::abs(c - pos.col) <= 1) {
        obs.revealed.push_back(
            {p, is_target ? Identity::Target : Identity::Distractor});
      }
    }
  }
  return obs;
}

EnumerationFilter EnumerationFilter::start(const GridMap& map, Position actor,
                                           int distractors) {
  EnumerationFilter f;
  f.total_distractors = distractors;
  int n = 0;
  for (int i = 0; i < kNumCells; ++i) {
    if (map.cells()[i] == Cell::Wall || i == actor.row * kGridSize + actor.col)
      f.excluded.insert(i);
    else
      ++n;
  }
  for (int i = 0; i < kNumCells; ++i)
    f.probs[i] = f.excluded.count(i) ? 0.0 : 1.0 / n;
  return f;
}

void EnumerationFilter::update(const Observation& obs) {
  auto idx = [](Position p) { return p.row * kGridSize + p.col; };
  std::set<int> revealed_now;
  for (const auto& s : obs.seen) {
    if (s.content == Content::Empty) excluded.insert(idx(s.pos));
  }
  for (const auto& r : obs.revealed) {
    revealed_now.insert(idx(r.pos));
    if (r.identity == Identity::Distractor) {
      excluded.insert(idx(r.pos));
      known_distractors.insert(idx(r.pos));
    } else {
      target = idx(r.pos);
    }
  }
  if (target) {
    probs.fill(0.0);
    probs[*target] = 1.0;
    return;
  }
  for (int i : excluded) probs[i] = 0.0;

  std::vector<int> sighted;
  for (const auto& s : obs.seen) {
    int i = idx(s.pos);
    if (s.content == Content::Object && !revealed_now.count(i) &&
        !known_distractors.count(i))
      sighted.push_back(i);
  }
  std::vector<int> cells;
  for (int i = 0; i < kNumCells; ++i) {
    if (!excluded.count(i)) cells.push_back(i);
  }
  const int d = total_distractors - static_cast<int>(known_distractors.size());

  // Number of ordered d-tuples over `cells` that hit every sighted cell
  // except the hypothesised target.
  auto covering = [&](int t) {
    long count = 0;
    std::vector<int> tuple(d);
    std::function<void(int)> rec = [&](int depth) {
      if (depth == d) {
        for (int s : sighted) {
          if (s == t) continue;
          if (std::find(tuple.begin(), tuple.end(), s) == tuple.end()) return;
        }
        ++count;
        return;
      }
      for (int c : cells) {
        tuple[depth] = c;
        rec(depth + 1);
      }
    };
    rec(0);
    return static_cast<double>(count);
  };

  double total = 0.0;
  for (int t : cells) {
    probs[t] *= sighted.empty() ? 1.0 : covering(t);
    total += probs[t];
  }
  for (double& p : probs) p /= total;
}

std::vector<EncodedSample> random_samples(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<EncodedSample> out(n);
  for (EncodedSample& s : out) {
    s.input.resize(kInputSize);
    for (double& v : s.input) v = rng.uniform01() < 0.1 ? 1.0 : 0.0;
    s.label_target = static_cast<int>(rng.uniform_index(kNumCells));
    s.label_action = static_cast<int>(rng.uniform_index(kNumActions));
    s.label_state = static_cast<int>(rng.uniform_index(kNumCells));
    double total = 0.0;
    for (double& p : s.label_belief) {
      p = rng.uniform01() < 0.3 ? rng.uniform01() : 0.0;
      total += p;
    }
    s.label_belief[s.label_target] += 0.5;
    total += 0.5;
    for (double& p : s.label_belief) p /= total;
  }
  return out;
}

GradCheckResult gradient_check(Variant v, std::uint64_t seed, int per_tensor,
                               double h) {
  SpsModel model = SpsModel::create(v, SpsWidths::reduced(), seed);
  Rng rng(derive_seed(seed, {77}));
  // Move biases and batch-norm affine terms off their initial constants.
  for (Param& p : model.params()) {
    if (p.regularized) continue;
    for (double& w : p.value) w += 0.2 * rng.normal();
  }
  auto samples = random_samples(derive_seed(seed, {78}), 4);
  Batch batch = make_batch(samples);
  const Regularization reg{};

  model.zero_grad();
  forward_backward(model, batch, reg, false);

  GradCheckResult res;
  for (Param& p : model.params()) {
    for (int k = 0; k < per_tensor; ++k) {
      const std::size_t i = rng.uniform_index(p.size());
      const double saved = p.value[i];
      auto at = [&](double x, auto&& fn) {
        p.value[i] = x;
        auto r = fn();
        p.value[i] = saved;
        return r;
      };
      auto loss = [&] { return training_loss(model, batch, reg).total; };
      auto pattern = [&] { return activation_pattern(model, batch); };
      // The loss is smooth on an interval when no leaky-ReLU input changes
      // sign inside it and the |w| penalty does not cross zero. A central
      // difference needs [x-s, x+s] smooth; when a kink sits close to x on
      // one side, a one-sided difference on the other side still works.
      // Both are Richardson-extrapolated so a large step keeps roundoff small.
      const auto base = at(saved, pattern);
      auto smooth_to = [&](double end) {
        if (p.regularized && (saved > 0) != (end > 0)) return false;
        for (double f : {1.0, 0.5, 0.25})
          if (at(saved + f * (end - saved), pattern) != base) return false;
        return true;
      };
      const double f0 = at(saved, loss);
      double s = h;
      double numeric = 0.0;
      for (int level = 0;; ++level) {
        const bool left = smooth_to(saved - s), right = smooth_to(saved + s);
        if (left && right) {
          const double wide = (at(saved + s, loss) - at(saved - s, loss)) / (2 * s);
          const double narrow = (at(saved + s / 2, loss) - at(saved - s / 2, loss)) / s;
          numeric = (4 * narrow - wide) / 3;
          break;
        }
        if (left || right || level == 7) {
          const double dir = right ? 1.0 : -1.0;
          auto one_sided = [&](double t) {
            return dir * (at(saved + dir * t, loss) - f0) / t;
          };
          numeric = (8 * one_sided(s / 4) - 6 * one_sided(s / 2) + one_sided(s)) / 3;
          break;
        }
        ++res.kinks;
        s /= 4;
      }
      const double analytic = p.grad[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      const double rel = std::abs(numeric - analytic) / scale;
      ++res.coordinates;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = p.name;
      }
    }
  }
  return res;
}

std::vector<EncodedSample> memorization_subset() {
  Dataset d = build_dataset(tiny_spec(8, 8, 40, 3));
  std::vector<EncodedSample> out;
  const std::size_t stride = d.samples.size() / 32;
  for (std::size_t i = 0; i < 32; ++i) out.push_back(d.samples[i * stride]);
  return out;
}

MemorizationResult memorize(Variant v, const std::vector<EncodedSample>& subset,
                            int max_epochs, double goal) {
  SpsModel model = SpsModel::create(v, SpsWidths{}, 11);
  AdamState adam = AdamState::for_model(model);
  Batch batch = make_batch(subset);
  MemorizationResult r;
  auto score = [&] {
    BatchOutputs out = forward_batch(model, batch);
    int hit = 0;
    for (int i = 0; i < batch.size; ++i) {
      Eigen::Index best;
      out.target.row(i).maxCoeff(&best);
      hit += best == batch.target[i];
    }
    return 100.0 * hit / batch.size;
  };
  for (r.epochs = 1; r.epochs <= max_epochs; ++r.epochs) {
    model.zero_grad();
    forward_backward(model, batch, {}, true);
    adam_step(model, adam, 0.001);
    if (r.epochs % 10 == 0) {
      r.accuracy = score();
      if (r.accuracy >= goal) return r;
    }
  }
  r.epochs = max_epochs;
  r.accuracy = score();
  return r;
}

const std::vector<WelchFixture>& welch_fixtures() {
  static const std::vector<WelchFixture> fx = {
      {"textbook",
       {27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6,
        19.0, 21.7, 21.4},
       {27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.8,
        23.2, 19.8, 20.9},
       -2.180952485467246, 0.03858067756853194},
      {"unequal_n",
       {1.1, 2.3, 3.2, 4.8, 5.0},
       {2.2, 2.9, 3.1, 6.4, 7.5, 8.1, 9.0},
       -1.7940579001951158, 0.10368494503335983},
      {"unequal_var",
       {10.0, 10.1, 9.9, 10.05, 9.95, 10.02},
       {8.0, 12.5, 9.1, 14.2, 6.3, 11.0, 13.3, 7.7},
       -0.25235053684727715, 0.8080082056159531},
      {"small",
       {0.5, 1.5},
       {2.0, 3.0, 4.5},
       -2.456769074559977, 0.09118321093646782},
      {"shifted",
       {69.1, 70.2, 68.8, 69.9, 70.4, 68.7, 69.5, 69.0},
       {67.2, 68.1, 67.0, 67.9, 66.8, 68.3, 67.5, 67.6},
       6.384204297806306, 2.0471954181650546e-05},
      {"negative",
       {-3.2, -1.1, -2.5, -4.0, -0.7, -2.2},
       {-1.0, 0.5, -0.2, 1.3, 0.1, -0.8},
       -3.6807876964336588, 0.005226848727401024},
  };
  return fx;
}

DatasetSpec tiny_spec(int maps, int trajectories, int budget,
                      std::uint64_t seed) {
  DatasetSpec s;
  s.split = Split::Train;
  s.n_train_maps = maps;
  s.trajectories_per_map = trajectories;
  s.planner.sample_budget = budget;
  s.master_seed = seed;
  return s;
}

std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("tomnet_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
