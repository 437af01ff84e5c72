#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tomnet/datagen.hpp"
#include "tomnet/sps.hpp"

namespace tomnet {

enum class ConditionKind : std::uint8_t {
  Global,
  TargetHidden,
  TargetVisible,
  Neglected,
  Aligned,
  Budget,
};

/// Sample filter of one evaluation condition.
///
/// Neglected rows count distractors revealed up to the prediction step and
/// leave out samples whose target identity is already revealed. Aligned and
/// budget rows select samples of dedicated test sets by their metadata.
struct EvalCondition {
  ConditionKind kind = ConditionKind::Global;
  int n = 0;
  /// Extra visibility filter for neglected and aligned rows.
  std::optional<bool> target_visible;

  static EvalCondition global() { return {}; }
  static EvalCondition hidden() { return {ConditionKind::TargetHidden, 0, {}}; }
  static EvalCondition visible() { return {ConditionKind::TargetVisible, 0, {}}; }
  static EvalCondition neglected(int n, std::optional<bool> visible = {});
  static EvalCondition aligned(int n, std::optional<bool> visible = {});
  static EvalCondition budget(int b);

  bool matches(const SampleMeta& meta) const;

  /// Stable text form, e.g. "global", "neglected3_visible", "budget50".
  std::string label() const;
  static EvalCondition parse(std::string_view label);

  friend bool operator==(const EvalCondition&, const EvalCondition&) = default;
};

/// argmax of the target logits per sample, ties to the lowest cell.
std::vector<int> predict_targets(const SpsModel& model,
                                 std::span<const EncodedSample> samples);

/// Accuracy in percent over the samples passing the filter; nullopt when the
/// filter leaves no sample.
std::optional<double> accuracy(std::span<const EncodedSample> samples,
                               std::span<const int> predictions,
                               const EvalCondition& cond);

std::optional<double> evaluate(const SpsModel& model, const Dataset& testset,
                               const EvalCondition& cond);

/// One forward pass over the test set, then every condition.
std::vector<std::optional<double>> evaluate_all(
    const SpsModel& model, const Dataset& testset,
    std::span<const EvalCondition> conds);

/// Accuracy of one evaluated run under one condition.
struct SweepRecord {
  std::string condition;
  int maps = 0;
  Variant variant = Variant::Bel;
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> accuracy;
  friend bool operator==(const SweepRecord&, const SweepRecord&) = default;
};

std::string sweep_csv(std::span<const SweepRecord> records);
std::vector<SweepRecord> parse_sweep_csv(std::string_view text);

struct CellSummary {
  double lr = 0.0;
  std::vector<double> accuracies;  // seed order
  double mean = 0.0;
  double var = 0.0;
  int missing = 0;  // runs whose filter was empty
};

struct ReportRow {
  std::string condition;
  int maps = 0;
  std::optional<CellSummary> bel, nobel;
  std::optional<double> diff, p;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  /// Cells that could not be summarized, with the reason.
  std::vector<std::string> issues;

  const ReportRow* find(std::string_view condition, int maps) const;
};

/// Picks the best learning rate per (maps, variant) by mean global accuracy
/// and summarizes every condition with it.
EvalReport build_report(std::span<const SweepRecord> records);
std::string report_csv(const EvalReport& report);
std::string report_markdown(const EvalReport& report);

}  // namespace tomnet
