#include <cmath>

#include "sps_internal.hpp"
#include "tomnet/error.hpp"
#include "tomnet/sps.hpp"

namespace tomnet {

namespace detail {

nn::Matrix softmax_rows(const nn::Matrix& logits) {
  nn::Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      out(i, j) = std::exp(logits(i, j) - mx);
      s += out(i, j);
    }
    out.row(i) /= s;
  }
  return out;
}

namespace {

/// log-sum-exp of one row.
double row_lse(const nn::Matrix& m, Eigen::Index i) {
  const double mx = m.row(i).maxCoeff();
  double s = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) s += std::exp(m(i, j) - mx);
  return mx + std::log(s);
}

}  // namespace

double cross_entropy(const nn::Matrix& logits, std::span<const int> labels,
                     nn::Matrix* dlogits) {
  const Eigen::Index n = logits.rows();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += row_lse(logits, i) - logits(i, labels[i]);
  }
  if (dlogits != nullptr) {
    *dlogits = softmax_rows(logits);
    for (Eigen::Index i = 0; i < n; ++i) (*dlogits)(i, labels[i]) -= 1.0;
    *dlogits /= static_cast<double>(n);
  }
  return loss / static_cast<double>(n);
}

double kl_divergence(const nn::Matrix& logits, const nn::Matrix& labels,
                     nn::Matrix* dlogits) {
  const Eigen::Index n = logits.rows();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lse = row_lse(logits, i);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double y = labels(i, j);
      if (y > 0.0) loss += y * (std::log(y) - (logits(i, j) - lse));
    }
  }
  if (dlogits != nullptr) {
    *dlogits = (softmax_rows(logits) - labels) / static_cast<double>(n);
  }
  return loss / static_cast<double>(n);
}

void check_simplex_rows(const nn::Matrix& labels) {
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      const double y = labels(i, j);
      if (!(y >= 0.0) || !std::isfinite(y)) {
        throw ShapeError("belief label has a negative or non-finite entry");
      }
      s += y;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ShapeError("belief label does not sum to 1");
    }
  }
}

}  // namespace detail

double regularization_l1(const SpsModel& model) {
  double s = 0.0;
  for (const Param& p : model.params()) {
    if (!p.regularized) continue;
    for (double w : p.value) s += std::abs(w);
  }
  return s;
}

double regularization_l2(const SpsModel& model) {
  double s = 0.0;
  for (const Param& p : model.params()) {
    if (!p.regularized) continue;
    for (double w : p.value) s += w * w;
  }
  return s;
}

LossComponents compute_loss(const BatchOutputs& outputs, const Batch& batch,
                            Variant variant, const SpsModel& model,
                            const Regularization& reg) {
  if (outputs.target.rows() != batch.size) {
    throw ShapeError("outputs and labels differ in batch size");
  }
  LossComponents c;
  c.target = detail::cross_entropy(outputs.target, batch.target, nullptr);
  c.action = detail::cross_entropy(outputs.action, batch.action, nullptr);
  c.state = detail::cross_entropy(outputs.state, batch.state, nullptr);
  if (variant == Variant::Bel) {
    detail::check_simplex_rows(batch.belief);
    if (outputs.belief_probs.rows() != batch.size) {
      throw ShapeError("BEL loss needs belief outputs");
    }
    double kl = 0.0;
    for (Eigen::Index i = 0; i < batch.belief.rows(); ++i) {
      for (Eigen::Index j = 0; j < batch.belief.cols(); ++j) {
        const double y = batch.belief(i, j);
        if (y > 0.0) kl += y * (std::log(y) - std::log(outputs.belief_probs(i, j)));
      }
    }
    c.belief = kl / static_cast<double>(batch.size);
  }
  c.l1 = reg.l1 * regularization_l1(model);
  c.l2 = reg.l2 * regularization_l2(model);
  c.total = c.data() + c.l1 + c.l2;
  return c;
}

}  // namespace tomnet
