#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tomnet/datagen.hpp"
#include "tomnet/eval.hpp"
#include "tomnet/train.hpp"

namespace tomnet {

/// Everything one experiment needs, read from an INI file with [dataset],
/// [train] and [eval] sections plus an optional top-level `out` key.
struct ExperimentConfig {
  // [dataset]
  std::vector<int> train_maps = {25};
  int test_maps = 10;
  int trajectories_per_map = 30;
  int window = 5;
  std::uint64_t master_seed = 1;
  PlannerConfig planner;
  MapGenConfig mapgen;

  // [train]
  std::vector<Variant> variants = {Variant::Bel, Variant::NoBel};
  std::vector<double> lrs = {0.001};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5};
  /// Template for every run; variant, base_lr and init_seed are overwritten.
  SpsConfig sps;

  // [eval]
  std::vector<EvalCondition> conditions = default_conditions();
  /// Aligned-distractor test sets to build (k in 1..3).
  std::vector<int> aligned;
  /// Planner budgets of extra test sets.
  std::vector<int> budgets;
  int renders = 3;

  std::filesystem::path out = "out";

  /// Normalized key = value listing of every setting except `out`.
  std::string canonical() const;
  void validate() const;

  static std::vector<EvalCondition> default_conditions();

  DatasetSpec train_spec(int maps) const;
  DatasetSpec test_spec(int aligned_k = -1, int budget = -1) const;
  SpsConfig run_config(Variant v, double lr, std::uint64_t seed) const;
};

/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace tomnet
