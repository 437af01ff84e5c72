#include <cmath>
#include <utility>

#include "sps_internal.hpp"
#include "tomnet/error.hpp"
#include "tomnet/rng.hpp"
#include "tomnet/sps.hpp"

namespace tomnet {

using nn::ConstMatrixMap;
using nn::Matrix;
using nn::MatrixMap;

std::string_view variant_name(Variant v) {
  return v == Variant::Bel ? "BEL" : "NOBEL";
}

std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "BEL") return Variant::Bel;
  if (s == "NOBEL") return Variant::NoBel;
  return std::nullopt;
}

int SpsModel::add_param(std::string name, std::vector<int> shape,
                        bool regularized) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value.assign(n, 0.0);
  p.grad.assign(n, 0.0);
  p.regularized = regularized;
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

int SpsModel::add_buffer(std::string name, std::vector<int> shape,
                         double fill) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  buffers_.push_back({std::move(name), std::move(shape),
                      std::vector<double>(n, fill)});
  return static_cast<int>(buffers_.size()) - 1;
}

detail::ConvSpec SpsModel::make_conv(const std::string& name, int k, int cin,
                                     int cout, bool bias) {
  detail::ConvSpec c;
  c.k = k;
  c.cin = cin;
  c.cout = cout;
  c.w = add_param(name + ".w", {k * k * cin, cout}, true);
  if (bias) c.b = add_param(name + ".b", {cout}, false);
  return c;
}

detail::BnSpec SpsModel::make_bn(const std::string& name, int c) {
  detail::BnSpec bn;
  bn.c = c;
  bn.gamma = add_param(name + ".gamma", {c}, false);
  bn.beta = add_param(name + ".beta", {c}, false);
  std::fill(params_[bn.gamma].value.begin(), params_[bn.gamma].value.end(),
            1.0);
  bn.mean = add_buffer(name + ".running_mean", {c}, 0.0);
  bn.var = add_buffer(name + ".running_var", {c}, 1.0);
  return bn;
}

detail::LinearSpec SpsModel::make_linear(const std::string& name, int in,
                                         int out) {
  detail::LinearSpec l;
  l.in = in;
  l.out = out;
  l.w = add_param(name + ".w", {in, out}, true);
  l.b = add_param(name + ".b", {out}, false);
  return l;
}

detail::SpatialHeadSpec SpsModel::make_spatial_head(const std::string& name) {
  const SpsWidths& w = widths_;
  detail::SpatialHeadSpec h;
  h.wide = make_conv(name + ".conv_wide", 3, w.torso, w.head_wide, true);
  h.narrow = make_conv(name + ".conv_narrow", 3, w.head_wide, w.head_narrow,
                       true);
  h.fc = make_linear(name + ".fc", kNumCells * w.head_narrow, kNumCells);
  h.branch = make_conv(name + ".branch_conv", 3, w.head_narrow,
                       w.head_branch, true);
  h.branch_out = make_conv(name + ".branch_out", 1, w.head_branch, 1, false);
  return h;
}

SpsModel SpsModel::create(Variant variant, const SpsWidths& widths,
                          std::uint64_t init_seed) {
  SpsModel m;
  m.variant_ = variant;
  m.widths_ = widths;
  m.stem = m.make_conv("torso.stem", 3, kNumPlanes, widths.torso, false);
  m.stem_bn = m.make_bn("torso.stem_bn", widths.torso);
  for (int i = 0; i < kNumResidualBlocks; ++i) {
    const std::string name = "torso.block" + std::to_string(i);
    m.blocks[i] = m.make_conv(name + ".conv", 3, widths.torso, widths.torso,
                              false);
    m.block_bn[i] = m.make_bn(name + ".bn", widths.torso);
  }
  m.target_head = m.make_spatial_head("head.target");
  m.action_head.conv =
      m.make_conv("head.action.conv", 3, widths.torso, widths.head_wide, true);
  m.action_head.hidden =
      m.make_linear("head.action.fc1", widths.head_wide, widths.action_hidden);
  m.action_head.out =
      m.make_linear("head.action.fc2", widths.action_hidden, kNumActions);
  m.state_head = m.make_spatial_head("head.state");
  if (variant == Variant::Bel) m.belief_head = m.make_spatial_head("head.belief");

  Rng rng(init_seed);
  for (Param& p : m.params_) {
    if (!p.regularized) continue;
    const double fan_in = p.shape[0];
    const double stddev = std::sqrt(2.0 / fan_in);
    for (double& v : p.value) v = stddev * rng.normal();
  }
  return m;
}

std::size_t SpsModel::parameter_count() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.size();
  return n;
}

std::size_t SpsModel::parameter_count(std::string_view prefix) const {
  std::size_t n = 0;
  for (const Param& p : params_) {
    if (std::string_view(p.name).starts_with(prefix)) n += p.size();
  }
  return n;
}

const Param& SpsModel::param(std::string_view name) const {
  for (const Param& p : params_) {
    if (p.name == name) return p;
  }
  throw Error("unknown parameter " + std::string(name));
}

Param& SpsModel::param(std::string_view name) {
  return const_cast<Param&>(std::as_const(*this).param(name));
}

void SpsModel::zero_grad() {
  for (Param& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

bool operator==(const SpsModel& a, const SpsModel& b) {
  if (a.variant_ != b.variant_ || !(a.widths_ == b.widths_)) return false;
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name ||
        a.params_[i].shape != b.params_[i].shape ||
        a.params_[i].value != b.params_[i].value) {
      return false;
    }
  }
  if (a.buffers_.size() != b.buffers_.size()) return false;
  for (std::size_t i = 0; i < a.buffers_.size(); ++i) {
    if (a.buffers_[i].name != b.buffers_[i].name ||
        a.buffers_[i].value != b.buffers_[i].value) {
      return false;
    }
  }
  return true;
}

Batch make_batch(std::span<const EncodedSample> samples,
                 std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("empty batch");
  Batch b;
  b.size = static_cast<int>(indices.size());
  b.input.resize(static_cast<Eigen::Index>(b.size) * kNumCells, kNumPlanes);
  b.belief.resize(b.size, kNumCells);
  for (int n = 0; n < b.size; ++n) {
    const EncodedSample& s = samples[indices[n]];
    if (static_cast<int>(s.input.size()) != kInputSize) {
      throw ShapeError("sample input must be 11 x 11 x 20");
    }
    std::copy(s.input.begin(), s.input.end(),
              b.input.data() + static_cast<std::size_t>(n) * kInputSize);
    b.target.push_back(s.label_target);
    b.action.push_back(s.label_action);
    b.state.push_back(s.label_state);
    for (int c = 0; c < kNumCells; ++c) b.belief(n, c) = s.label_belief[c];
  }
  return b;
}

Batch make_batch(std::span<const EncodedSample> samples) {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(samples, idx);
}

std::vector<HeadOutputs> BatchOutputs::split() const {
  std::vector<HeadOutputs> out(static_cast<std::size_t>(target.rows()));
  for (Eigen::Index n = 0; n < target.rows(); ++n) {
    HeadOutputs& h = out[n];
    for (int c = 0; c < kNumCells; ++c) {
      h.target_logits[c] = target(n, c);
      h.state_logits[c] = state(n, c);
    }
    for (int a = 0; a < kNumActions; ++a) h.action_logits[a] = action(n, a);
    if (belief_probs.rows() == target.rows()) {
      std::array<double, kNumCells> b{};
      for (int c = 0; c < kNumCells; ++c) b[c] = belief_probs(n, c);
      h.belief_probs = b;
    }
  }
  return out;
}

namespace {

struct ConvCache {
  Matrix col;
};

struct SpatialCache {
  ConvCache narrow, branch, branch_out;
  Matrix wide_act, narrow_act, branch_act;
};

struct ActionCache {
  Matrix conv_act, pooled, hidden_act;
};

/// One forward (and optionally backward) evaluation of the network.
class Pass {
 public:
  Pass(const SpsModel& model, Mode mode, int batch)
      : m_(model), mode_(mode), n_(batch) {}

  /// Runs the forward pass; returns head logits (belief as logits).
  void forward(const Matrix& input) {
    // Stem.
    Matrix z;
    conv(m_.stem, input, stem_col_, z);
    batch_norm(m_.stem_bn, z, stem_bn_, 0, torso_[0]);
    nn::leaky_relu_inplace(torso_[0]);
    // Residual blocks: out = lrelu(x + bn(conv(x))).
    for (int i = 0; i < kNumResidualBlocks; ++i) {
      conv(m_.blocks[i], torso_[i], block_col_[i], z);
      Matrix y;
      batch_norm(m_.block_bn[i], z, block_bn_cache_[i], i + 1, y);
      torso_[i + 1] = y + torso_[i];
      nn::leaky_relu_inplace(torso_[i + 1]);
    }
    // Every head starts with a 3x3 convolution of the torso output, so the
    // patch matrix is built once and shared.
    head_col_ = nn::im2col(torso_[kNumResidualBlocks], n_, 3);
    spatial_forward(m_.target_head, target_cache_, target_logits_);
    spatial_forward(m_.state_head, state_cache_, state_logits_);
    if (m_.belief_head) {
      spatial_forward(*m_.belief_head, belief_cache_, belief_logits_);
    }
    action_forward();
  }

  /// Appends x > 0 for every leaky-ReLU output (same sign as its input).
  void relu_signs(std::vector<std::uint8_t>& out) const {
    auto add = [&](const Matrix& a) {
      for (Eigen::Index i = 0; i < a.size(); ++i) out.push_back(a.data()[i] > 0);
    };
    for (const Matrix& t : torso_) add(t);
    for (const SpatialCache* c : {&target_cache_, &state_cache_, &belief_cache_}) {
      add(c->wide_act);
      add(c->narrow_act);
      add(c->branch_act);
    }
    add(action_cache_.conv_act);
    add(action_cache_.hidden_act);
  }

  BatchOutputs outputs() const {
    BatchOutputs o;
    o.target = target_logits_;
    o.action = action_logits_;
    o.state = state_logits_;
    if (m_.belief_head) o.belief_probs = detail::softmax_rows(belief_logits_);
    return o;
  }

  LossComponents loss(const Batch& b, const Regularization& reg,
                      bool want_grad) {
    LossComponents c;
    Matrix* dt = want_grad ? &d_target_ : nullptr;
    Matrix* da = want_grad ? &d_action_ : nullptr;
    Matrix* ds = want_grad ? &d_state_ : nullptr;
    c.target = detail::cross_entropy(target_logits_, b.target, dt);
    c.action = detail::cross_entropy(action_logits_, b.action, da);
    c.state = detail::cross_entropy(state_logits_, b.state, ds);
    if (m_.belief_head) {
      detail::check_simplex_rows(b.belief);
      c.belief = detail::kl_divergence(belief_logits_, b.belief,
                                       want_grad ? &d_belief_ : nullptr);
    }
    c.l1 = reg.l1 * regularization_l1(m_);
    c.l2 = reg.l2 * regularization_l2(m_);
    c.total = c.data() + c.l1 + c.l2;
    return c;
  }

  /// Backpropagates the gradients prepared by loss() into grads.
  void backward(SpsModel& grads, const Regularization& reg) {
    Matrix dcol = Matrix::Zero(head_col_.rows(), head_col_.cols());
    spatial_backward(grads, m_.target_head, target_cache_, d_target_, dcol);
    spatial_backward(grads, m_.state_head, state_cache_, d_state_, dcol);
    if (m_.belief_head) {
      spatial_backward(grads, *m_.belief_head, belief_cache_, d_belief_, dcol);
    }
    action_backward(grads, dcol);
    Matrix dt = nn::col2im(dcol, n_, 3, m_.widths().torso);

    for (int i = kNumResidualBlocks - 1; i >= 0; --i) {
      nn::leaky_relu_backward(torso_[i + 1], dt);
      Matrix dz;
      bn_backward(grads, m_.block_bn[i], block_bn_cache_[i], dt, dz);
      Matrix dx;
      conv_backward(grads, m_.blocks[i], block_col_[i], dz, &dx);
      dt += dx;
    }
    nn::leaky_relu_backward(torso_[0], dt);
    Matrix dz;
    bn_backward(grads, m_.stem_bn, stem_bn_, dt, dz);
    conv_backward(grads, m_.stem, stem_col_, dz, nullptr);

    for (Param& p : grads.params()) {
      if (!p.regularized) continue;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double w = p.value[i];
        const double sign = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
        p.grad[i] += reg.l1 * sign + 2.0 * reg.l2 * w;
      }
    }
  }

  /// Batch statistics of each batch-norm layer, for running-stat updates.
  std::array<std::pair<nn::RowVector, nn::RowVector>, kNumResidualBlocks + 1>
      batch_stats;

 private:
  ConstMatrixMap weight(const detail::ConvSpec& c) const {
    return ConstMatrixMap(m_.params()[c.w].value.data(), c.k * c.k * c.cin,
                          c.cout);
  }

  void conv(const detail::ConvSpec& c, const Matrix& x, Matrix& col,
            Matrix& y) const {
    const double* bias = c.b >= 0 ? m_.params()[c.b].value.data() : nullptr;
    nn::conv_forward(x, n_, c.k, weight(c), bias, col, y);
  }

  void conv_backward(SpsModel& g, const detail::ConvSpec& c, const Matrix& col,
                     const Matrix& dy, Matrix* dx) const {
    Param& pw = g.params()[c.w];
    MatrixMap dw(pw.grad.data(), c.k * c.k * c.cin, c.cout);
    double* db = c.b >= 0 ? g.params()[c.b].grad.data() : nullptr;
    nn::conv_backward(dy, col, n_, c.k, weight(c), dw, db, dx);
  }

  void conv_from_col(const detail::ConvSpec& c, const Matrix& col,
                     Matrix& y) const {
    y.noalias() = col * weight(c);
    Eigen::Map<const nn::RowVector> b(m_.params()[c.b].value.data(), c.cout);
    y.rowwise() += b;
  }

  /// Gradients of a convolution fed by the shared patch matrix; the patch
  /// gradient is accumulated into dcol.
  void conv_backward_col(SpsModel& g, const detail::ConvSpec& c,
                         const Matrix& col, const Matrix& dy,
                         Matrix& dcol) const {
    MatrixMap dw(g.params()[c.w].grad.data(), c.k * c.k * c.cin, c.cout);
    dw.noalias() += col.transpose() * dy;
    nn::add_column_sums(dy, g.params()[c.b].grad.data());
    dcol.noalias() += dy * weight(c).transpose();
  }

  void batch_norm(const detail::BnSpec& bn, const Matrix& x,
                  nn::BnCache& cache, int slot, Matrix& y) {
    const double* gamma = m_.params()[bn.gamma].value.data();
    const double* beta = m_.params()[bn.beta].value.data();
    if (mode_ == Mode::Train) {
      nn::bn_forward_train(x, gamma, beta, kBnEps, y, cache,
                           batch_stats[slot].first, batch_stats[slot].second);
    } else {
      nn::bn_forward_infer(x, gamma, beta, m_.buffers()[bn.mean].value.data(),
                           m_.buffers()[bn.var].value.data(), kBnEps, y);
    }
  }

  void bn_backward(SpsModel& g, const detail::BnSpec& bn,
                   const nn::BnCache& cache, const Matrix& dy,
                   Matrix& dx) const {
    nn::bn_backward(dy, cache, m_.params()[bn.gamma].value.data(),
                    g.params()[bn.gamma].grad.data(),
                    g.params()[bn.beta].grad.data(), dx);
  }

  void linear(const detail::LinearSpec& l, const Matrix& x, Matrix& y) const {
    ConstMatrixMap w(m_.params()[l.w].value.data(), l.in, l.out);
    Eigen::Map<const nn::RowVector> b(m_.params()[l.b].value.data(), l.out);
    y.noalias() = x * w;
    y.rowwise() += b;
  }

  /// Returns dx = dy * W^T and accumulates dW, db.
  Matrix linear_backward(SpsModel& g, const detail::LinearSpec& l,
                         const Matrix& x, const Matrix& dy) const {
    MatrixMap dw(g.params()[l.w].grad.data(), l.in, l.out);
    dw.noalias() += x.transpose() * dy;
    nn::add_column_sums(dy, g.params()[l.b].grad.data());
    ConstMatrixMap w(m_.params()[l.w].value.data(), l.in, l.out);
    return dy * w.transpose();
  }

  void spatial_forward(const detail::SpatialHeadSpec& h, SpatialCache& c,
                       Matrix& logits) const {
    conv_from_col(h.wide, head_col_, c.wide_act);
    nn::leaky_relu_inplace(c.wide_act);
    conv(h.narrow, c.wide_act, c.narrow.col, c.narrow_act);
    nn::leaky_relu_inplace(c.narrow_act);
    ConstMatrixMap flat(c.narrow_act.data(), n_, kNumCells * h.narrow.cout);
    ConstMatrixMap w(m_.params()[h.fc.w].value.data(), h.fc.in, h.fc.out);
    Eigen::Map<const nn::RowVector> b(m_.params()[h.fc.b].value.data(),
                                      h.fc.out);
    logits.noalias() = flat * w;
    logits.rowwise() += b;
    conv(h.branch, c.narrow_act, c.branch.col, c.branch_act);
    nn::leaky_relu_inplace(c.branch_act);
    Matrix spatial;
    conv(h.branch_out, c.branch_act, c.branch_out.col, spatial);
    logits += ConstMatrixMap(spatial.data(), n_, kNumCells);
  }

  void spatial_backward(SpsModel& g, const detail::SpatialHeadSpec& h,
                        const SpatialCache& c, const Matrix& dlogits,
                        Matrix& dcol) const {
    const int narrow = h.narrow.cout;
    // Fully connected branch.
    ConstMatrixMap flat(c.narrow_act.data(), n_, kNumCells * narrow);
    MatrixMap dw(g.params()[h.fc.w].grad.data(), h.fc.in, h.fc.out);
    dw.noalias() += flat.transpose() * dlogits;
    nn::add_column_sums(dlogits, g.params()[h.fc.b].grad.data());
    ConstMatrixMap w(m_.params()[h.fc.w].value.data(), h.fc.in, h.fc.out);
    Matrix dflat = dlogits * w.transpose();
    Matrix dnarrow = ConstMatrixMap(dflat.data(),
                                    static_cast<Eigen::Index>(n_) * kNumCells,
                                    narrow);
    // Convolutional branch.
    Matrix dspatial =
        ConstMatrixMap(dlogits.data(), static_cast<Eigen::Index>(n_) * kNumCells, 1);
    Matrix dbranch;
    conv_backward(g, h.branch_out, c.branch_out.col, dspatial, &dbranch);
    nn::leaky_relu_backward(c.branch_act, dbranch);
    Matrix dnarrow_b;
    conv_backward(g, h.branch, c.branch.col, dbranch, &dnarrow_b);
    dnarrow += dnarrow_b;
    // Shared trunk of the head.
    nn::leaky_relu_backward(c.narrow_act, dnarrow);
    Matrix dwide;
    conv_backward(g, h.narrow, c.narrow.col, dnarrow, &dwide);
    nn::leaky_relu_backward(c.wide_act, dwide);
    conv_backward_col(g, h.wide, head_col_, dwide, dcol);
  }

  void action_forward() {
    const detail::ActionHeadSpec& h = m_.action_head;
    conv_from_col(h.conv, head_col_, action_cache_.conv_act);
    nn::leaky_relu_inplace(action_cache_.conv_act);
    action_cache_.pooled = nn::global_avg_pool(action_cache_.conv_act, n_);
    linear(h.hidden, action_cache_.pooled, action_cache_.hidden_act);
    nn::leaky_relu_inplace(action_cache_.hidden_act);
    linear(h.out, action_cache_.hidden_act, action_logits_);
  }

  void action_backward(SpsModel& g, Matrix& dcol) const {
    const detail::ActionHeadSpec& h = m_.action_head;
    Matrix dhidden = linear_backward(g, h.out, action_cache_.hidden_act,
                                     d_action_);
    nn::leaky_relu_backward(action_cache_.hidden_act, dhidden);
    Matrix dpooled =
        linear_backward(g, h.hidden, action_cache_.pooled, dhidden);
    Matrix dconv = nn::global_avg_pool_backward(dpooled, n_);
    nn::leaky_relu_backward(action_cache_.conv_act, dconv);
    conv_backward_col(g, h.conv, head_col_, dconv, dcol);
  }

  const SpsModel& m_;
  Mode mode_;
  int n_;

  Matrix stem_col_;
  nn::BnCache stem_bn_;
  std::array<Matrix, kNumResidualBlocks> block_col_;
  std::array<nn::BnCache, kNumResidualBlocks> block_bn_cache_;
  std::array<Matrix, kNumResidualBlocks + 1> torso_;
  Matrix head_col_;

  SpatialCache target_cache_, state_cache_, belief_cache_;
  ActionCache action_cache_;
  Matrix target_logits_, state_logits_, belief_logits_, action_logits_;
  Matrix d_target_, d_state_, d_belief_, d_action_;
};

void check_input(const Batch& b) {
  if (b.size <= 0) throw ShapeError("empty batch");
  if (b.input.rows() != static_cast<Eigen::Index>(b.size) * kNumCells ||
      b.input.cols() != kNumPlanes) {
    throw ShapeError("batch input must be [n * 121, 20]");
  }
}

void update_running(SpsModel& model, const Pass& pass, int batch) {
  const double rows = static_cast<double>(batch) * kNumCells;
  const double unbias = rows > 1.0 ? rows / (rows - 1.0) : 1.0;
  auto apply = [&](const detail::BnSpec& bn, int slot) {
    auto& mean = model.buffers()[bn.mean].value;
    auto& var = model.buffers()[bn.var].value;
    const auto& [bm, bv] = pass.batch_stats[slot];
    for (int j = 0; j < bn.c; ++j) {
      mean[j] = (1.0 - kBnMomentum) * mean[j] + kBnMomentum * bm[j];
      var[j] = (1.0 - kBnMomentum) * var[j] + kBnMomentum * bv[j] * unbias;
    }
  };
  apply(model.stem_bn, 0);
  for (int i = 0; i < kNumResidualBlocks; ++i) apply(model.block_bn[i], i + 1);
}

}  // namespace

BatchOutputs forward_batch(const SpsModel& model, const Batch& batch) {
  check_input(batch);
  Pass pass(model, Mode::Inference, batch.size);
  pass.forward(batch.input);
  return pass.outputs();
}

std::vector<HeadOutputs> forward(const SpsModel& model,
                                 std::span<const EncodedSample> batch) {
  if (batch.empty()) throw ShapeError("empty batch");
  std::vector<HeadOutputs> out;
  out.reserve(batch.size());
  for (const EncodedSample& s : batch)
    out.push_back(forward_batch(model, make_batch(std::span(&s, 1))).split()[0]);
  return out;
}

LossComponents forward_backward(SpsModel& model, const Batch& batch,
                                const Regularization& reg,
                                bool update_running_stats) {
  check_input(batch);
  Pass pass(model, Mode::Train, batch.size);
  pass.forward(batch.input);
  LossComponents c = pass.loss(batch, reg, true);
  pass.backward(model, reg);
  if (update_running_stats) update_running(model, pass, batch.size);
  return c;
}

std::vector<std::uint8_t> activation_pattern(const SpsModel& model,
                                            const Batch& batch) {
  check_input(batch);
  Pass pass(model, Mode::Train, batch.size);
  pass.forward(batch.input);
  std::vector<std::uint8_t> signs;
  pass.relu_signs(signs);
  return signs;
}

LossComponents training_loss(const SpsModel& model, const Batch& batch,
                             const Regularization& reg) {
  check_input(batch);
  Pass pass(model, Mode::Train, batch.size);
  pass.forward(batch.input);
  return pass.loss(batch, reg, false);
}

}  // namespace tomnet
