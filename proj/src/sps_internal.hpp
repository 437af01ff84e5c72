#pragma once

#include <span>

#include "tomnet/kernels.hpp"

namespace tomnet::detail {

nn::Matrix softmax_rows(const nn::Matrix& logits);

/// Mean cross entropy of integer labels; writes (softmax - onehot) / N.
double cross_entropy(const nn::Matrix& logits, std::span<const int> labels,
                     nn::Matrix* dlogits);

/// Mean KL(label || softmax(logits)); writes (softmax - label) / N.
double kl_divergence(const nn::Matrix& logits, const nn::Matrix& labels,
                     nn::Matrix* dlogits);

/// Throws ShapeError unless every row is a probability vector.
void check_simplex_rows(const nn::Matrix& labels);

}  // namespace tomnet::detail
