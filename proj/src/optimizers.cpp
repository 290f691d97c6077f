#include "tfln/optimizers.hpp"

#include <cmath>

#include "tfln/error.hpp"

namespace tfln {

namespace {

const Tensor& find_grad(const std::map<std::string, Tensor>& grads,
                        const std::string& name, const Tensor& param) {
  auto it = grads.find(name);
  if (it == grads.end()) {
    throw ShapeError("optimizer: no gradient for parameter '" + name + "'");
  }
  if (!it->second.same_shape(param)) {
    throw ShapeError("optimizer: gradient for '" + name + "' has shape " +
                     it->second.shape_str() + ", parameter is " + param.shape_str());
  }
  return it->second;
}

}  // namespace

void adagrad_update(std::map<std::string, Tensor>& params,
                    const std::map<std::string, Tensor>& grads, AdagradState& state,
                    double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw ValidationError("adagrad: learning_rate must be > 0");
  }
  for (auto& [name, param] : params) {
    const Tensor& grad = find_grad(grads, name, param);
    auto it = state.accumulators.find(name);
    if (it == state.accumulators.end()) {
      it = state.accumulators
               .emplace(name, Tensor(param.rows(), param.cols(),
                                     AdagradState::kInitialAccumulator))
               .first;
    }
    Tensor& acc = it->second;
    if (!acc.same_shape(param)) {
      throw ShapeError("adagrad: accumulator for '" + name + "' has shape " +
                       acc.shape_str() + ", parameter is " + param.shape_str());
    }
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad.data()[i];
      acc.data()[i] += g * g;
      param.data()[i] -= learning_rate * g / (std::sqrt(acc.data()[i]) + state.epsilon);
    }
  }
}

void sgd_update(std::map<std::string, Tensor>& params,
                const std::map<std::string, Tensor>& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw ValidationError("sgd: learning_rate must be > 0");
  }
  for (auto& [name, param] : params) {
    const Tensor& grad = find_grad(grads, name, param);
    for (std::size_t i = 0; i < param.size(); ++i) {
      param.data()[i] -= learning_rate * grad.data()[i];
    }
  }
}

void apply_update(std::map<std::string, Tensor>& params,
                  const std::map<std::string, Tensor>& grads,
                  const OptimizerBinding& binding, AdagradState& state) {
  switch (binding.kind) {
    case OptimizerKind::kSgd:
      sgd_update(params, grads, binding.learning_rate);
      break;
    case OptimizerKind::kAdagrad:
      adagrad_update(params, grads, state, binding.learning_rate);
      break;
  }
}

}  // namespace tfln
