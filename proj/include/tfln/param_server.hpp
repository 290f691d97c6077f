#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "tfln/optimizers.hpp"
#include "tfln/tensor.hpp"
#include "tfln/wire.hpp"

namespace tfln {

enum class DistMode { kSync, kAsync };

std::string to_string(DistMode mode);
DistMode dist_mode_from_string(const std::string& name);

struct PsApplyResult {
  enum class Status {
    kApplied,   // an optimizer update was applied; broadcast holds fresh params
    kBuffered,  // sync barrier not yet full; nothing changed
    kStale,     // sync gradient against an old step; worker must re-pull
  };

  Status status = Status::kBuffered;
  std::uint64_t global_step = 0;  // step after this call
  std::optional<ParamBroadcast> broadcast;
};

/// Authoritative parameters plus optimizer state of the parameter server.
///
/// In async mode every gradient message is applied on arrival. In sync mode
/// messages buffer until every expected worker has reported for the current
/// step; the buffered gradients are then averaged (in worker-id order, so the
/// result does not depend on arrival order) and applied as one update.
///
/// Not internally synchronized: the transport layer serializes access.
class ParamServerState {
 public:
  ParamServerState(std::map<std::string, Tensor> params, OptimizerBinding binding,
                   DistMode mode, std::size_t expected_workers,
                   std::int64_t start_step = 0, AdagradState adagrad = {});

  PsApplyResult apply(const GradientMessage& msg);

  ParamBroadcast snapshot() const;

  std::int64_t global_step() const { return global_step_; }
  DistMode mode() const { return mode_; }
  std::size_t expected_workers() const { return expected_workers_; }
  const std::map<std::string, Tensor>& parameters() const { return params_; }
  const AdagradState& adagrad_state() const { return adagrad_; }

  std::int64_t applied_updates() const { return applied_updates_; }
  const std::map<std::uint32_t, std::int64_t>& per_worker_applied() const {
    return per_worker_applied_;
  }

 private:
  void validate_gradients(const GradientMessage& msg) const;
  void apply_gradients(const std::map<std::string, Tensor>& grads);

  std::map<std::string, Tensor> params_;
  OptimizerBinding binding_;
  DistMode mode_;
  std::size_t expected_workers_;
  std::int64_t global_step_;
  AdagradState adagrad_;

  // Sync barrier buffer for the current step, keyed by worker id.
  std::map<std::uint32_t, GradientMessage> pending_;

  std::int64_t applied_updates_ = 0;
  std::map<std::uint32_t, std::int64_t> per_worker_applied_;
};

}  // namespace tfln
