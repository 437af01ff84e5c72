#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tomnet/conditions.hpp"
#include "tomnet/gridworld.hpp"
#include "tomnet/planner.hpp"

namespace tomnet {

inline constexpr int kNumPlanes = 20;
inline constexpr int kInputSize = kNumCells * kNumPlanes;
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

/// Plane indices of the encoded input.
namespace plane {
inline constexpr int kAction = 0;    // 0..8, last action tiled
inline constexpr int kObject = 9;    // 9..12, one object instance each
inline constexpr int kHistory = 13;  // 13..17, position at lags 1..5
inline constexpr int kWalls = 18;
inline constexpr int kCurrent = 19;
}  // namespace plane

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct DatasetSpec {
  Split split = Split::Train;
  int n_train_maps = 25;
  int n_test_maps = 10;
  int trajectories_per_map = 30;
  int window = 5;
  /// Distractors forced onto a shortest start-target path; -1 = random.
  int aligned = -1;
  PlannerConfig planner;
  MapGenConfig mapgen;
  std::uint64_t master_seed = 1;

  void validate() const;
  int map_count() const {
    return split == Split::Train ? n_train_maps : n_test_maps;
  }
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Map ids: train maps 0..n-1, test maps from kTestMapIdBase.
inline constexpr int kTestMapIdBase = 100000;
int map_id_for(Split split, int index);
GridMap dataset_map(const DatasetSpec& spec, int index);

struct SampleMeta {
  int map_id = 0;
  int trajectory_id = 0;
  int t = 0;
  ConditionFlags flags;
  int aligned = -1;
  int budget = 0;
  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

struct EncodedSample {
  /// 11 x 11 x 20, channel fastest: input[cell * 20 + plane].
  std::vector<double> input;
  int label_target = 0;
  int label_action = 0;
  int label_state = 0;
  std::array<double, kNumCells> label_belief{};
  SampleMeta meta;

  double at(int cell, int p) const { return input[cell * kNumPlanes + p]; }
  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;
};

EncodedSample encode_window(const GridMap& map, const Trajectory& traj, int t,
                            int window = 5);

struct SampleRef {
  std::uint32_t trajectory = 0;
  std::int32_t t = 0;
  friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<GridMap> maps;
  std::vector<Trajectory> trajectories;
  std::vector<SampleRef> index;
  std::vector<EncodedSample> samples;

  const GridMap& map_for(const Trajectory& traj) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Placement for trajectory `traj_id` of a dataset map.
PlacementDraw dataset_placement(const DatasetSpec& spec, const GridMap& map,
                                int traj_id);

Dataset build_dataset(const DatasetSpec& spec);

/// Rebuilds index and samples from maps and trajectories.
void encode_all(Dataset& d);

std::vector<std::uint8_t> serialize_dataset(const Dataset& d);
Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
std::string dataset_sidecar(const Dataset& d);

}  // namespace tomnet
