#pragma once

#include <utility>

#include "tfln/tensor.hpp"

namespace tfln {

/// Mean softmax cross-entropy over rows plus its gradient w.r.t. the logits:
/// loss = mean_i( -sum_j target[i][j] * log_softmax(logits)[i][j] ),
/// dlogits = (softmax(logits) - target) / n_rows.
/// Target rows must be valid one-hot vectors.
std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits,
                                                const Tensor& onehot_targets);

/// Mean sigmoid cross-entropy for a single-column logit against 0/1 targets
/// (the 2-class logistic loss). Returns (loss, dlogits).
std::pair<double, Tensor> sigmoid_cross_entropy(const Tensor& logits,
                                                const Tensor& targets01);

/// Mean squared error between a single-column prediction and targets,
/// with gradient dpred = 2 * (pred - target) / n_rows.
std::pair<double, Tensor> mean_squared_error(const Tensor& predictions,
                                             const Tensor& targets);

}  // namespace tfln
