#include "tomnet/eval.hpp"

#include <charconv>

#include "tomnet/error.hpp"

namespace tomnet {

namespace {

constexpr std::size_t kChunk = 256;

int parse_int(std::string_view s, std::string_view label) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error("bad condition label '" + std::string(label) + "'");
  }
  return v;
}

}  // namespace

EvalCondition EvalCondition::neglected(int n, std::optional<bool> visible) {
  if (n < 1 || n > kNumDistractors) throw Error("neglected count must be 1..3");
  return {ConditionKind::Neglected, n, visible};
}

EvalCondition EvalCondition::aligned(int n, std::optional<bool> visible) {
  if (n < 1 || n > kNumDistractors) throw Error("aligned count must be 1..3");
  return {ConditionKind::Aligned, n, visible};
}

EvalCondition EvalCondition::budget(int b) {
  if (b < 1) throw Error("budget must be positive");
  return {ConditionKind::Budget, b, {}};
}

bool EvalCondition::matches(const SampleMeta& meta) const {
  const bool visible = !meta.flags.target_hidden;
  auto visibility_ok = [&] {
    return !target_visible || *target_visible == visible;
  };
  switch (kind) {
    case ConditionKind::Global:
      return true;
    case ConditionKind::TargetHidden:
      return !visible;
    case ConditionKind::TargetVisible:
      return visible;
    case ConditionKind::Neglected:
      return meta.flags.neglected == n && !meta.flags.target_identified &&
             visibility_ok();
    case ConditionKind::Aligned:
      return meta.aligned == n && visibility_ok();
    case ConditionKind::Budget:
      return meta.budget == n;
  }
  return false;
}

std::string EvalCondition::label() const {
  std::string s;
  switch (kind) {
    case ConditionKind::Global:
      return "global";
    case ConditionKind::TargetHidden:
      return "hidden";
    case ConditionKind::TargetVisible:
      return "visible";
    case ConditionKind::Neglected:
      s = "neglected" + std::to_string(n);
      break;
    case ConditionKind::Aligned:
      s = "aligned" + std::to_string(n);
      break;
    case ConditionKind::Budget:
      return "budget" + std::to_string(n);
  }
  if (target_visible) s += *target_visible ? "_visible" : "_hidden";
  return s;
}

EvalCondition EvalCondition::parse(std::string_view label) {
  if (label == "global") return global();
  if (label == "hidden") return hidden();
  if (label == "visible") return visible();
  std::optional<bool> vis;
  std::string_view body = label;
  if (body.ends_with("_visible")) {
    vis = true;
    body.remove_suffix(8);
  } else if (body.ends_with("_hidden")) {
    vis = false;
    body.remove_suffix(7);
  }
  if (body.starts_with("neglected")) {
    return neglected(parse_int(body.substr(9), label), vis);
  }
  if (body.starts_with("aligned")) {
    return aligned(parse_int(body.substr(7), label), vis);
  }
  if (body.starts_with("budget") && !vis) {
    return budget(parse_int(body.substr(6), label));
  }
  throw Error("unknown condition '" + std::string(label) + "'");
}

std::vector<int> predict_targets(const SpsModel& model,
                                 std::span<const EncodedSample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const std::size_t end = std::min(samples.size(), begin + kChunk);
    idx.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) idx[i - begin] = i;
    const BatchOutputs o = forward_batch(model, make_batch(samples, idx));
    for (Eigen::Index n = 0; n < o.target.rows(); ++n) {
      int best = 0;
      for (int c = 1; c < kNumCells; ++c) {
        if (o.target(n, c) > o.target(n, best)) best = c;
      }
      out.push_back(best);
    }
  }
  return out;
}

std::optional<double> accuracy(std::span<const EncodedSample> samples,
                               std::span<const int> predictions,
                               const EvalCondition& cond) {
  if (predictions.size() != samples.size()) {
    throw ShapeError("one prediction per sample required");
  }
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!cond.matches(samples[i].meta)) continue;
    ++total;
    if (predictions[i] == samples[i].label_target) ++correct;
  }
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

std::optional<double> evaluate(const SpsModel& model, const Dataset& testset,
                               const EvalCondition& cond) {
  return evaluate_all(model, testset, std::span(&cond, 1)).front();
}

std::vector<std::optional<double>> evaluate_all(
    const SpsModel& model, const Dataset& testset,
    std::span<const EvalCondition> conds) {
  const std::vector<int> pred = predict_targets(model, testset.samples);
  std::vector<std::optional<double>> out;
  for (const EvalCondition& c : conds) {
    out.push_back(accuracy(testset.samples, pred, c));
  }
  return out;
}

}  // namespace tomnet
