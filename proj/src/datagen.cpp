#include "tomnet/datagen.hpp"

#include <algorithm>
#include <sstream>

#include "tomnet/binio.hpp"
#include "tomnet/error.hpp"
#include "tomnet/rng.hpp"

namespace tomnet {

namespace {

enum Stream : std::uint64_t {
  kMapStream = 1,
  kPlacementStream = 2,
  kEpisodeStream = 3,
  kOrderStream = 4,
};

constexpr std::uint32_t kMagic = fourcc("TOMG");
constexpr std::uint32_t kTagSpec = fourcc("SPEC");
constexpr std::uint32_t kTagMaps = fourcc("MAPS");
constexpr std::uint32_t kTagTraj = fourcc("TRAJ");
constexpr std::uint32_t kTagIndex = fourcc("INDX");

}  // namespace

void DatasetSpec::validate() const {
  if (n_train_maps < 1 || n_train_maps > 300) {
    throw Error("n_train_maps must lie in [1, 300]");
  }
  if (n_test_maps < 1) throw Error("n_test_maps must be positive");
  if (trajectories_per_map < 1) throw Error("trajectories_per_map must be >= 1");
  if (window < 0 || window > 5) throw Error("window must lie in [0, 5]");
  if (aligned < -1 || aligned > kNumDistractors) {
    throw Error("aligned must be -1 or lie in [0, 3]");
  }
  planner.validate();
}

int map_id_for(Split split, int index) {
  return split == Split::Train ? index : kTestMapIdBase + index;
}

GridMap dataset_map(const DatasetSpec& spec, int index) {
  const int id = map_id_for(spec.split, index);
  return generate_map(
      derive_seed(spec.master_seed, {kMapStream, static_cast<std::uint64_t>(id)}),
      spec.mapgen, id);
}

PlacementDraw dataset_placement(const DatasetSpec& spec, const GridMap& map,
                                int traj_id) {
  const std::uint64_t seed = derive_seed(
      spec.master_seed, {kPlacementStream, static_cast<std::uint64_t>(map.id()),
                         static_cast<std::uint64_t>(traj_id)});
  if (spec.aligned >= 0) {
    return make_aligned_trials(
        map, spec.aligned,
        derive_seed(seed, {static_cast<std::uint64_t>(spec.aligned)}));
  }
  return place_objects(map, seed);
}

const GridMap& Dataset::map_for(const Trajectory& traj) const {
  for (const GridMap& m : maps) {
    if (m.id() == traj.map_id) return m;
  }
  throw Error("trajectory references unknown map " +
              std::to_string(traj.map_id));
}

EncodedSample encode_window(const GridMap& map, const Trajectory& traj, int t,
                            int window) {
  if (t < 0 || t >= traj.length() - 1) {
    throw Error("encode_window: t out of range");
  }
  EncodedSample s;
  s.input.assign(kInputSize, 0.0);
  auto set = [&](int cell, int p) { s.input[cell * kNumPlanes + p] = 1.0; };

  if (t > 0) {
    const int a = action_id(traj.steps[t - 1].action);
    for (int c = 0; c < kNumCells; ++c) set(c, plane::kAction + a);
  }
  const std::array<Position, 4> objects = {
      traj.placement.target, traj.placement.distractors[0],
      traj.placement.distractors[1], traj.placement.distractors[2]};
  for (int k = 0; k < 4; ++k) {
    set(objects[traj.object_order[k]].index(), plane::kObject + k);
  }
  for (int lag = 1; lag <= window; ++lag) {
    if (t - lag < 0) break;
    set(traj.steps[t - lag].pos.index(), plane::kHistory + lag - 1);
  }
  for (int c = 0; c < kNumCells; ++c) {
    if (map.is_wall(Position::from_index(c))) set(c, plane::kWalls);
  }
  set(traj.steps[t].pos.index(), plane::kCurrent);

  s.label_target = traj.placement.target.index();
  s.label_action = action_id(traj.steps[t].action);
  s.label_state = traj.steps[t + 1].pos.index();
  s.label_belief = traj.steps[t].belief_after.probs;
  s.meta.map_id = traj.map_id;
  s.meta.trajectory_id = traj.trajectory_id;
  s.meta.t = t;
  s.meta.flags = classify_sample(traj, t);
  return s;
}

void encode_all(Dataset& d) {
  d.index.clear();
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
    for (int t = 0; t + 1 < d.trajectories[i].length(); ++t) {
      d.index.push_back({static_cast<std::uint32_t>(i), t});
    }
  }
  d.samples.assign(d.index.size(), EncodedSample{});
  const auto n = static_cast<std::int64_t>(d.index.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const SampleRef ref = d.index[i];
    const Trajectory& traj = d.trajectories[ref.trajectory];
    EncodedSample s = encode_window(d.map_for(traj), traj, ref.t, d.spec.window);
    s.meta.aligned = d.spec.aligned;
    s.meta.budget = d.spec.planner.sample_budget;
    d.samples[i] = std::move(s);
  }
}

Dataset build_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset d;
  d.spec = spec;
  const int n_maps = spec.map_count();
  d.maps.resize(n_maps);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_maps; ++i) d.maps[i] = dataset_map(spec, i);

  const int per_map = spec.trajectories_per_map;
  d.trajectories.resize(static_cast<std::size_t>(n_maps) * per_map);
  const auto total = static_cast<std::int64_t>(d.trajectories.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t k = 0; k < total; ++k) {
    const GridMap& map = d.maps[k / per_map];
    const int traj_id = static_cast<int>(k % per_map);
    const PlacementDraw draw = dataset_placement(spec, map, traj_id);
    PlannerConfig cfg = spec.planner;
    // Episode seeds ignore the budget so budget variants share trials.
    cfg.seed = derive_seed(spec.master_seed,
                           {kEpisodeStream, static_cast<std::uint64_t>(map.id()),
                            static_cast<std::uint64_t>(traj_id),
                            spec.planner.seed});
    Trajectory traj = run_episode(map, draw.placement, draw.actor_start, cfg);
    traj.trajectory_id = traj_id;
    Rng order_rng(derive_seed(
        spec.master_seed, {kOrderStream, static_cast<std::uint64_t>(map.id()),
                           static_cast<std::uint64_t>(traj_id)}));
    order_rng.shuffle(std::span<std::uint8_t>(traj.object_order));
    d.trajectories[k] = std::move(traj);
  }
  encode_all(d);
  return d;
}

namespace {

void put_pos(ByteWriter& w, Position p) {
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.row));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.col));
}

Position get_pos(ByteReader& r) {
  Position p;
  p.row = r.get<std::uint8_t>();
  p.col = r.get<std::uint8_t>();
  if (!p.on_grid()) throw FormatError("position off grid");
  return p;
}

void put_spec(ByteWriter& w, const DatasetSpec& s) {
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.split));
  w.put<std::int32_t>(s.n_train_maps);
  w.put<std::int32_t>(s.n_test_maps);
  w.put<std::int32_t>(s.trajectories_per_map);
  w.put<std::int32_t>(s.window);
  w.put<std::int32_t>(s.aligned);
  w.put<std::uint64_t>(s.master_seed);
  w.put<double>(s.mapgen.wall_density);
  w.put<std::int32_t>(s.mapgen.columns);
  const PlannerConfig& p = s.planner;
  w.put<std::int32_t>(p.sample_budget);
  w.put<double>(p.ucb_constant);
  w.put<double>(p.discount);
  w.put<std::int32_t>(p.rollout_depth);
  w.put<double>(p.step_reward);
  w.put<double>(p.goal_reward);
  w.put<std::int32_t>(p.max_episode_steps);
  w.put<std::uint64_t>(p.seed);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.rollout));
}

DatasetSpec get_spec(ByteReader& r) {
  DatasetSpec s;
  const auto split = r.get<std::uint8_t>();
  if (split > 1) throw FormatError("bad split tag");
  s.split = static_cast<Split>(split);
  s.n_train_maps = r.get<std::int32_t>();
  s.n_test_maps = r.get<std::int32_t>();
  s.trajectories_per_map = r.get<std::int32_t>();
  s.window = r.get<std::int32_t>();
  s.aligned = r.get<std::int32_t>();
  s.master_seed = r.get<std::uint64_t>();
  s.mapgen.wall_density = r.get<double>();
  s.mapgen.columns = r.get<std::int32_t>();
  PlannerConfig& p = s.planner;
  p.sample_budget = r.get<std::int32_t>();
  p.ucb_constant = r.get<double>();
  p.discount = r.get<double>();
  p.rollout_depth = r.get<std::int32_t>();
  p.step_reward = r.get<double>();
  p.goal_reward = r.get<double>();
  p.max_episode_steps = r.get<std::int32_t>();
  p.seed = r.get<std::uint64_t>();
  const auto rollout = r.get<std::uint8_t>();
  if (rollout > 1) throw FormatError("bad rollout tag");
  p.rollout = static_cast<RolloutPolicy>(rollout);
  return s;
}

void put_belief(ByteWriter& w, const BeliefDistribution& b) {
  for (double p : b.probs) w.put<double>(p);
  for (int i = 0; i < kNumCells; ++i) {
    w.put<std::uint8_t>(b.excluded.test(i) ? 1 : 0);
  }
  w.put<std::uint8_t>(static_cast<std::uint8_t>(b.identified_distractors.size()));
  for (Position p : b.identified_distractors) put_pos(w, p);
  w.put<std::uint8_t>(b.identified_target ? 1 : 0);
  if (b.identified_target) put_pos(w, *b.identified_target);
  w.put<std::int32_t>(b.total_distractors);
}

BeliefDistribution get_belief(ByteReader& r) {
  BeliefDistribution b;
  for (double& p : b.probs) p = r.get<double>();
  for (int i = 0; i < kNumCells; ++i) {
    if (r.get<std::uint8_t>()) b.excluded.set(i);
  }
  const auto n = r.get<std::uint8_t>();
  for (int i = 0; i < n; ++i) b.identified_distractors.push_back(get_pos(r));
  if (r.get<std::uint8_t>()) b.identified_target = get_pos(r);
  b.total_distractors = r.get<std::int32_t>();
  return b;
}

void put_trajectory(ByteWriter& w, const Trajectory& t) {
  w.put<std::int32_t>(t.map_id);
  w.put<std::int32_t>(t.trajectory_id);
  put_pos(w, t.placement.target);
  for (Position p : t.placement.distractors) put_pos(w, p);
  put_pos(w, t.start);
  w.put<std::uint8_t>(t.reached_target ? 1 : 0);
  for (std::uint8_t o : t.object_order) w.put<std::uint8_t>(o);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.steps.size()));
  for (const Step& s : t.steps) {
    w.put<std::int32_t>(s.t);
    put_pos(w, s.pos);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(action_id(s.action)));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.obs.seen.size()));
    for (const SeenCell& c : s.obs.seen) {
      put_pos(w, c.pos);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(c.content));
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.obs.revealed.size()));
    for (const Revealed& c : s.obs.revealed) {
      put_pos(w, c.pos);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(c.identity));
    }
    put_belief(w, s.belief_after);
  }
}

Trajectory get_trajectory(ByteReader& r) {
  Trajectory t;
  t.map_id = r.get<std::int32_t>();
  t.trajectory_id = r.get<std::int32_t>();
  t.placement.target = get_pos(r);
  for (Position& p : t.placement.distractors) p = get_pos(r);
  t.start = get_pos(r);
  t.reached_target = r.get<std::uint8_t>() != 0;
  for (std::uint8_t& o : t.object_order) {
    o = r.get<std::uint8_t>();
    if (o > 3) throw FormatError("bad object order");
  }
  const auto n_steps = r.get<std::uint32_t>();
  if (n_steps > r.remaining()) throw FormatError("truncated trajectory");
  t.steps.resize(n_steps);
  for (Step& s : t.steps) {
    s.t = r.get<std::int32_t>();
    s.pos = get_pos(r);
    s.action = action_from_id(r.get<std::uint8_t>());
    const auto n_seen = r.get<std::uint32_t>();
    if (n_seen > 25) throw FormatError("too many seen cells");
    s.obs.seen.resize(n_seen);
    for (SeenCell& c : s.obs.seen) {
      c.pos = get_pos(r);
      c.content = static_cast<Content>(r.get<std::uint8_t>());
    }
    const auto n_rev = r.get<std::uint32_t>();
    if (n_rev > 9) throw FormatError("too many revealed cells");
    s.obs.revealed.resize(n_rev);
    for (Revealed& c : s.obs.revealed) {
      c.pos = get_pos(r);
      c.identity = static_cast<Identity>(r.get<std::uint8_t>());
    }
    s.belief_after = get_belief(r);
  }
  return t;
}

}  // namespace

std::vector<std::uint8_t> serialize_dataset(const Dataset& d) {
  ByteWriter out;
  out.put<std::uint32_t>(kMagic);
  out.put<std::uint32_t>(kDatasetFormatVersion);

  ByteWriter spec;
  put_spec(spec, d.spec);
  out.put_section(kTagSpec, spec);

  ByteWriter maps;
  maps.put<std::uint32_t>(static_cast<std::uint32_t>(d.maps.size()));
  for (const GridMap& m : d.maps) {
    maps.put<std::int32_t>(m.id());
    maps.put<std::uint64_t>(m.gen_seed());
    for (Cell c : m.cells()) maps.put<std::uint8_t>(static_cast<std::uint8_t>(c));
  }
  out.put_section(kTagMaps, maps);

  ByteWriter trajs;
  trajs.put<std::uint32_t>(static_cast<std::uint32_t>(d.trajectories.size()));
  for (const Trajectory& t : d.trajectories) {
    ByteWriter rec;
    put_trajectory(rec, t);
    trajs.put<std::uint32_t>(static_cast<std::uint32_t>(rec.size()));
    trajs.put_bytes(rec.bytes());
  }
  out.put_section(kTagTraj, trajs);

  ByteWriter index;
  index.put<std::uint32_t>(static_cast<std::uint32_t>(d.index.size()));
  for (const SampleRef& ref : d.index) {
    index.put<std::uint32_t>(ref.trajectory);
    index.put<std::int32_t>(ref.t);
  }
  out.put_section(kTagIndex, index);
  return out.bytes();
}

Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw FormatError("empty dataset file");
  ByteReader in(bytes);
  if (in.get<std::uint32_t>() != kMagic) throw FormatError("bad dataset magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kDatasetFormatVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  Dataset d;
  {
    ByteReader r = in.get_section(kTagSpec);
    d.spec = get_spec(r);
  }
  {
    ByteReader r = in.get_section(kTagMaps);
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto id = r.get<std::int32_t>();
      const auto seed = r.get<std::uint64_t>();
      std::array<Cell, kNumCells> cells{};
      for (Cell& c : cells) {
        const auto v = r.get<std::uint8_t>();
        if (v > 1) throw FormatError("bad map cell");
        c = static_cast<Cell>(v);
      }
      d.maps.emplace_back(cells, id, seed);
    }
  }
  {
    ByteReader r = in.get_section(kTagTraj);
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto len = r.get<std::uint32_t>();
      ByteReader rec(r.get_bytes(len));
      d.trajectories.push_back(get_trajectory(rec));
      if (!rec.at_end()) throw FormatError("trailing bytes in trajectory");
    }
  }
  std::vector<SampleRef> stored;
  {
    ByteReader r = in.get_section(kTagIndex);
    const auto n = r.get<std::uint32_t>();
    stored.resize(n);
    for (SampleRef& ref : stored) {
      ref.trajectory = r.get<std::uint32_t>();
      ref.t = r.get<std::int32_t>();
    }
  }
  if (!in.at_end()) throw FormatError("trailing bytes after dataset");
  encode_all(d);
  if (stored != d.index) throw FormatError("sample index mismatch");
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(d));
  std::filesystem::path side = path;
  side += ".txt";
  write_text_atomic(side, dataset_sidecar(d));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return deserialize_dataset(read_file(path));
}

std::string dataset_sidecar(const Dataset& d) {
  const DatasetSpec& s = d.spec;
  std::ostringstream out;
  out.precision(17);
  out << "format = TOMG v" << kDatasetFormatVersion << "\n"
      << "split = " << (s.split == Split::Train ? "train" : "test") << "\n"
      << "n_train_maps = " << s.n_train_maps << "\n"
      << "n_test_maps = " << s.n_test_maps << "\n"
      << "trajectories_per_map = " << s.trajectories_per_map << "\n"
      << "window = " << s.window << "\n"
      << "aligned = " << s.aligned << "\n"
      << "master_seed = " << s.master_seed << "\n"
      << "wall_density = " << s.mapgen.wall_density << "\n"
      << "columns = " << s.mapgen.columns << "\n"
      << "sample_budget = " << s.planner.sample_budget << "\n"
      << "ucb_constant = " << s.planner.ucb_constant << "\n"
      << "discount = " << s.planner.discount << "\n"
      << "rollout_depth = " << s.planner.rollout_depth << "\n"
      << "step_reward = " << s.planner.step_reward << "\n"
      << "goal_reward = " << s.planner.goal_reward << "\n"
      << "max_episode_steps = " << s.planner.max_episode_steps << "\n"
      << "planner_seed = " << s.planner.seed << "\n"
      << "rollout = "
      << (s.planner.rollout == RolloutPolicy::Uniform ? "uniform"
                                                      : "shortest_path")
      << "\n"
      << "maps = " << d.maps.size() << "\n"
      << "trajectories = " << d.trajectories.size() << "\n"
      << "samples = " << d.samples.size() << "\n";
  out << "map_seeds =";
  for (const GridMap& m : d.maps) out << " " << m.id() << ":" << m.gen_seed();
  out << "\n";
  return out.str();
}

}  // namespace tomnet
