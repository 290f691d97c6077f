#include "tfln/param_server.hpp"

#include "tfln/error.hpp"

namespace tfln {

std::string to_string(DistMode mode) {
  return mode == DistMode::kSync ? "sync" : "async";
}

DistMode dist_mode_from_string(const std::string& name) {
  if (name == "sync") return DistMode::kSync;
  if (name == "async") return DistMode::kAsync;
  throw ValidationError("unknown distributed mode '" + name + "' (want sync|async)");
}

ParamServerState::ParamServerState(std::map<std::string, Tensor> params,
                                   OptimizerBinding binding, DistMode mode,
                                   std::size_t expected_workers,
                                   std::int64_t start_step, AdagradState adagrad)
    : params_(std::move(params)),
      binding_(binding),
      mode_(mode),
      expected_workers_(expected_workers),
      global_step_(start_step),
      adagrad_(std::move(adagrad)) {
  if (params_.empty()) {
    throw ValidationError("parameter server: empty parameter set");
  }
  if (expected_workers_ == 0) {
    throw ValidationError("parameter server: expected_workers must be >= 1");
  }
}

void ParamServerState::validate_gradients(const GradientMessage& msg) const {
  for (const auto& [name, param] : params_) {
    auto it = msg.gradients.find(name);
    if (it == msg.gradients.end()) {
      throw ShapeError("gradient message from worker " + std::to_string(msg.worker_id) +
                       " is missing '" + name + "'");
    }
    if (!it->second.same_shape(param)) {
      throw ShapeError("gradient '" + name + "' from worker " +
                       std::to_string(msg.worker_id) + " has shape " +
                       it->second.shape_str() + ", parameter is " + param.shape_str());
    }
  }
  for (const auto& [name, grad] : msg.gradients) {
    if (!params_.contains(name)) {
      throw ShapeError("gradient message names unknown parameter '" + name + "'");
    }
  }
}

void ParamServerState::apply_gradients(const std::map<std::string, Tensor>& grads) {
  apply_update(params_, grads, binding_, adagrad_);
  ++global_step_;
  ++applied_updates_;
}

PsApplyResult ParamServerState::apply(const GradientMessage& msg) {
  validate_gradients(msg);

  if (mode_ == DistMode::kAsync) {
    // Hogwild-style: apply regardless of staleness.
    apply_gradients(msg.gradients);
    ++per_worker_applied_[msg.worker_id];
    return {PsApplyResult::Status::kApplied,
            static_cast<std::uint64_t>(global_step_), snapshot()};
  }

  const auto current = static_cast<std::uint64_t>(global_step_);
  if (msg.basis_step < current) {
    return {PsApplyResult::Status::kStale, current, std::nullopt};
  }
  if (msg.basis_step > current) {
    throw InternalError("gradient from worker " + std::to_string(msg.worker_id) +
                        " claims future basis step " + std::to_string(msg.basis_step) +
                        " (server is at " + std::to_string(current) + ")");
  }
  if (pending_.contains(msg.worker_id)) {
    throw StateError("duplicate gradient from worker " + std::to_string(msg.worker_id) +
                     " for step " + std::to_string(msg.basis_step));
  }
  pending_.emplace(msg.worker_id, msg);
  if (pending_.size() < expected_workers_) {
    return {PsApplyResult::Status::kBuffered, current, std::nullopt};
  }

  // Unweighted mean over workers, iterated in worker-id order so the result
  // is independent of arrival order.
  std::map<std::string, Tensor> mean;
  const double inv = 1.0 / static_cast<double>(expected_workers_);
  for (const auto& [worker_id, pending_msg] : pending_) {
    for (const auto& [name, grad] : pending_msg.gradients) {
      auto it = mean.find(name);
      if (it == mean.end()) {
        mean.emplace(name, scale(grad, inv));
      } else {
        for (std::size_t i = 0; i < grad.size(); ++i) {
          it->second.data()[i] += grad.data()[i] * inv;
        }
      }
    }
    ++per_worker_applied_[worker_id];
  }
  pending_.clear();
  apply_gradients(mean);
  return {PsApplyResult::Status::kApplied, static_cast<std::uint64_t>(global_step_),
          snapshot()};
}

ParamBroadcast ParamServerState::snapshot() const {
  return {static_cast<std::uint64_t>(global_step_), params_};
}

}  // namespace tfln
