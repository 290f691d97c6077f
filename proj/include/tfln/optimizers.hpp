#pragma once

#include <map>
#include <string>

#include "tfln/tensor.hpp"

namespace tfln {

enum class OptimizerKind { kSgd, kAdagrad };

/// Which optimizer applies a model's gradients, and at what rate. Canned
/// estimators fix this at construction; custom model functions report it in
/// their train op.
struct OptimizerBinding {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 0.1;
};

/// Per-parameter squared-gradient accumulators for Adagrad. Accumulators are
/// created on first use at kInitialAccumulator and only ever grow.
struct AdagradState {
  static constexpr double kInitialAccumulator = 0.1;
  static constexpr double kDefaultEpsilon = 1e-8;

  std::map<std::string, Tensor> accumulators;
  double epsilon = kDefaultEpsilon;
};

/// acc += g*g; p -= lr * g / (sqrt(acc) + epsilon), element-wise.
void adagrad_update(std::map<std::string, Tensor>& params,
                    const std::map<std::string, Tensor>& grads, AdagradState& state,
                    double learning_rate);

/// p -= lr * g, element-wise.
void sgd_update(std::map<std::string, Tensor>& params,
                const std::map<std::string, Tensor>& grads, double learning_rate);

/// Applies one update with whichever optimizer the binding names.
/// `state` is touched only by Adagrad.
void apply_update(std::map<std::string, Tensor>& params,
                  const std::map<std::string, Tensor>& grads,
                  const OptimizerBinding& binding, AdagradState& state);

}  // namespace tfln
