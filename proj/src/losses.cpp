#include "tfln/losses.hpp"

#include <cmath>

#include "tfln/error.hpp"

namespace tfln {

std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits,
                                                const Tensor& onehot_targets) {
  if (!logits.same_shape(onehot_targets)) {
    throw ShapeError("softmax_cross_entropy: logits " + logits.shape_str() +
                     " vs targets " + onehot_targets.shape_str());
  }
  for (std::size_t i = 0; i < onehot_targets.rows(); ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < onehot_targets.cols(); ++j) {
      const double v = onehot_targets(i, j);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw ValidationError("softmax_cross_entropy: target row " + std::to_string(i) +
                              " is not one-hot");
      }
    }
    if (ones != 1) {
      throw ValidationError("softmax_cross_entropy: target row " + std::to_string(i) +
                            " is not one-hot");
    }
  }

  const double n = static_cast<double>(logits.rows());
  const Tensor logp = log_softmax_rows(logits);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (std::size_t j = 0; j < logits.cols(); ++j)
      loss -= onehot_targets(i, j) * logp(i, j);
  loss /= n;

  Tensor dlogits = softmax_rows(logits);
  for (std::size_t i = 0; i < dlogits.size(); ++i) {
    dlogits.data()[i] = (dlogits.data()[i] - onehot_targets.data()[i]) / n;
  }
  return {loss, std::move(dlogits)};
}

std::pair<double, Tensor> sigmoid_cross_entropy(const Tensor& logits,
                                                const Tensor& targets01) {
  if (!logits.same_shape(targets01) || logits.cols() != 1) {
    throw ShapeError("sigmoid_cross_entropy: expected matching n x 1 tensors, got " +
                     logits.shape_str() + " and " + targets01.shape_str());
  }
  const double n = static_cast<double>(logits.rows());
  double loss = 0.0;
  Tensor dlogits(logits.rows(), 1);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double z = logits(i, 0);
    const double y = targets01(i, 0);
    if (y != 0.0 && y != 1.0) {
      throw ValidationError("sigmoid_cross_entropy: target row " + std::to_string(i) +
                            " is not 0/1");
    }
    // log(1 + exp(-|z|)) form avoids overflow for large |z|.
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    const double p = 1.0 / (1.0 + std::exp(-z));
    dlogits(i, 0) = (p - y) / n;
  }
  return {loss / n, std::move(dlogits)};
}

std::pair<double, Tensor> mean_squared_error(const Tensor& predictions,
                                             const Tensor& targets) {
  if (!predictions.same_shape(targets)) {
    throw ShapeError("mean_squared_error: predictions " + predictions.shape_str() +
                     " vs targets " + targets.shape_str());
  }
  const double n = static_cast<double>(predictions.rows());
  double loss = 0.0;
  Tensor dpred(predictions.rows(), predictions.cols());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double diff = predictions.data()[i] - targets.data()[i];
    loss += diff * diff;
    dpred.data()[i] = 2.0 * diff / n;
  }
  return {loss / n, std::move(dpred)};
}

}  // namespace tfln
