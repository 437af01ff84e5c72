#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "tomnet/sps.hpp"

namespace tomnet {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments per parameter, parallel to SpsModel::params().
struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;

  static AdamState for_model(const SpsModel& model);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update from the gradients stored in the model.
/// Throws TrainingError naming the parameter if a gradient is not finite.
void adam_step(SpsModel& model, AdamState& state, double lr,
               const AdamConfig& cfg = {});

/// Scalar form used by tests: updates w in place.
void adam_step(std::span<double> w, std::span<const double> g,
               std::span<double> m, std::span<double> v, std::uint64_t step,
               double lr, const AdamConfig& cfg = {});

inline constexpr std::array<double, 6> kLearningRates = {
    0.00015, 0.00025, 0.0005, 0.00075, 0.000875, 0.001};
inline constexpr double kMinLearningRate = 0.00015;
inline constexpr double kMaxLearningRate = 0.001;
inline constexpr std::array<int, 4> kLrMilestones = {30, 60, 80, 160};

struct SpsConfig {
  Variant variant = Variant::Bel;
  double base_lr = 0.001;
  int batch_size = 32;
  double l1 = 0.005;
  double l2 = 0.001;
  std::vector<int> milestones = {30, 60, 80, 160};
  double lr_gamma = 0.5;
  int max_epochs = 200;
  int early_stop_patience = 20;
  std::uint64_t init_seed = 0;
  double validation_fraction = 0.1;
  SpsWidths widths;

  void validate() const;
  Regularization regularization() const { return {l1, l2}; }
};

/// base_lr * gamma^(number of milestones <= epoch).
double lr_at_epoch(double base_lr, int epoch,
                   std::span<const int> milestones = kLrMilestones,
                   double gamma = 0.5);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  LossComponents train;
  LossComponents validation;
};

struct TrainingCurves {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_validation = 0.0;
  bool early_stopped = false;
};

struct TrainResult {
  SpsModel model;
  AdamState adam;
  TrainingCurves curves;
};

/// Mean loss over samples in inference mode, evaluated in chunks.
LossComponents evaluate_loss(const SpsModel& model,
                             std::span<const EncodedSample> samples,
                             std::span<const std::size_t> indices,
                             const Regularization& reg);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const Dataset& dataset, const SpsConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// SPS1 checkpoint: model parameters, batch-norm statistics, optimizer state.
void save_checkpoint(const std::filesystem::path& path, const SpsModel& model,
                     const AdamState& adam);
std::vector<std::uint8_t> serialize_checkpoint(const SpsModel& model,
                                               const AdamState& adam);

struct Checkpoint {
  SpsModel model;
  AdamState adam;
};
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tomnet
