#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tomnet/datagen.hpp"
#include "tomnet/kernels.hpp"

namespace tomnet {

enum class Variant : std::uint8_t { Bel = 0, NoBel = 1 };

std::string_view variant_name(Variant v);  // "BEL" / "NOBEL"
std::optional<Variant> parse_variant(std::string_view s);

/// Channel widths. The defaults are the full network; tests use smaller ones.
struct SpsWidths {
  int torso = 32;
  int head_wide = 32;
  int head_narrow = 16;
  int head_branch = 4;
  int action_hidden = 32;

  static SpsWidths reduced() { return {8, 8, 4, 4, 8}; }
  friend bool operator==(const SpsWidths&, const SpsWidths&) = default;
};

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  /// Weights carry the L1/L2 penalty; biases and batch-norm affine terms do not.
  bool regularized = false;

  std::size_t size() const { return value.size(); }
};

/// Persistent non-trainable state (batch-norm running statistics).
struct Buffer {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
};

namespace detail {
struct ConvSpec {
  int w = -1, b = -1;
  int k = 3, cin = 0, cout = 0;
};
struct BnSpec {
  int gamma = -1, beta = -1, mean = -1, var = -1;
  int c = 0;
};
struct LinearSpec {
  int w = -1, b = -1;
  int in = 0, out = 0;
};
/// conv -> conv -> (fc to 121) + (conv -> 1x1 conv to 121)
struct SpatialHeadSpec {
  ConvSpec wide, narrow;
  LinearSpec fc;
  ConvSpec branch, branch_out;
};
/// conv -> global average pool -> fc -> fc to 9
struct ActionHeadSpec {
  ConvSpec conv;
  LinearSpec hidden, out;
};
}  // namespace detail

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;
inline constexpr int kNumResidualBlocks = 2;

class SpsModel {
 public:
  /// He-style fan-in initialization from init_seed.
  static SpsModel create(Variant variant, const SpsWidths& widths,
                         std::uint64_t init_seed);

  Variant variant() const { return variant_; }
  const SpsWidths& widths() const { return widths_; }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Buffer>& buffers() { return buffers_; }
  const std::vector<Buffer>& buffers() const { return buffers_; }

  std::size_t parameter_count() const;
  /// Parameters whose name starts with prefix.
  std::size_t parameter_count(std::string_view prefix) const;
  const Param& param(std::string_view name) const;
  Param& param(std::string_view name);

  void zero_grad();

  // Layer layout, indices into params_/buffers_.
  detail::ConvSpec stem;
  detail::BnSpec stem_bn;
  std::array<detail::ConvSpec, kNumResidualBlocks> blocks;
  std::array<detail::BnSpec, kNumResidualBlocks> block_bn;
  detail::SpatialHeadSpec target_head, state_head;
  std::optional<detail::SpatialHeadSpec> belief_head;
  detail::ActionHeadSpec action_head;

  friend bool operator==(const SpsModel& a, const SpsModel& b);

 private:
  SpsModel() = default;
  int add_param(std::string name, std::vector<int> shape, bool regularized);
  int add_buffer(std::string name, std::vector<int> shape, double fill);
  detail::ConvSpec make_conv(const std::string& name, int k, int cin, int cout,
                             bool bias);
  detail::BnSpec make_bn(const std::string& name, int c);
  detail::LinearSpec make_linear(const std::string& name, int in, int out);
  detail::SpatialHeadSpec make_spatial_head(const std::string& name);

  Variant variant_ = Variant::Bel;
  SpsWidths widths_;
  std::vector<Param> params_;
  std::vector<Buffer> buffers_;
};

/// Inputs and labels of a minibatch in kernel layout.
struct Batch {
  int size = 0;
  nn::Matrix input;  // [size * 121, 20]
  std::vector<int> target, action, state;
  nn::Matrix belief;  // [size, 121]
};

Batch make_batch(std::span<const EncodedSample> samples);
Batch make_batch(std::span<const EncodedSample> samples,
                 std::span<const std::size_t> indices);

struct HeadOutputs {
  std::array<double, kNumCells> target_logits{};
  std::array<double, kNumActions> action_logits{};
  std::array<double, kNumCells> state_logits{};
  std::optional<std::array<double, kNumCells>> belief_probs;
};

/// Batched head outputs, one row per sample.
struct BatchOutputs {
  nn::Matrix target, action, state;
  nn::Matrix belief_probs;  // empty for NOBEL
  std::vector<HeadOutputs> split() const;
};

enum class Mode { Train, Inference };

/// Inference-mode forward pass (running batch-norm statistics). Samples are
/// evaluated one at a time, so each output is independent of batch order.
std::vector<HeadOutputs> forward(const SpsModel& model,
                                 std::span<const EncodedSample> batch);
BatchOutputs forward_batch(const SpsModel& model, const Batch& batch);

struct LossComponents {
  double total = 0.0;
  double target = 0.0;
  double action = 0.0;
  double state = 0.0;
  double belief = 0.0;  // KL(label || prediction), BEL only
  double l1 = 0.0;
  double l2 = 0.0;

  double data() const { return target + action + state + belief; }
};

struct Regularization {
  double l1 = 0.005;
  double l2 = 0.001;
};

/// Loss of precomputed outputs. Throws if a belief label is off the simplex.
LossComponents compute_loss(const BatchOutputs& outputs, const Batch& batch,
                            Variant variant, const SpsModel& model,
                            const Regularization& reg = {});

/// Training-mode forward and backward pass. Gradients of the total loss are
/// accumulated into each Param::grad. update_running_stats controls whether
/// batch-norm running statistics move.
LossComponents forward_backward(SpsModel& model, const Batch& batch,
                                const Regularization& reg,
                                bool update_running_stats);

/// Training-mode loss without gradients or running-stat updates.
/// Sign of every leaky-ReLU input in a training-mode forward pass. The loss
/// is smooth in the parameters on any set where this pattern is constant.
std::vector<std::uint8_t> activation_pattern(const SpsModel& model,
                                            const Batch& batch);
LossComponents training_loss(const SpsModel& model, const Batch& batch,
                             const Regularization& reg);

double regularization_l1(const SpsModel& model);
double regularization_l2(const SpsModel& model);

}  // namespace tomnet
