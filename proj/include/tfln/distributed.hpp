#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tfln/dataset.hpp"
#include "tfln/estimator.hpp"
#include "tfln/param_server.hpp"
#include "tfln/run_config.hpp"
#include "tfln/transport.hpp"

namespace tfln {

struct DistributedOptions {
  /// How long a sync-mode barrier waits for the missing workers before the
  /// run is aborted with a diagnosable error instead of deadlocking.
  std::chrono::milliseconds sync_patience{30000};
};

/// Outcome of a training run (local or distributed).
struct TrainingReport {
  bool ok = true;
  std::string error_code;  // empty when ok
  std::string error_detail;
  std::string mode;  // "local", "sync", or "async"
  std::int64_t final_global_step = 0;
  std::int64_t applied_updates = 0;
  std::map<std::uint32_t, std::int64_t> per_worker_steps;
};

/// One worker iteration: forward + backward over the batch against the given
/// parameter snapshot. The returned gradients are tagged with the snapshot's
/// global step. Non-finite gradients raise TrainingError.
GradientMessage worker_step(std::uint32_t worker_id, const ModelFn& model_fn,
                            const Batch& batch, const ParamBroadcast& snapshot,
                            RngState& rng);

/// Parameter-server data-parallel training over the given transport.
///
/// The caller's thread acts as the master: it launches the ps task and one
/// thread per worker, waits for completion, installs the final parameters
/// into the estimator, and returns the report. Workers loop pull -> step ->
/// push over their shard (full shard per step). A cluster with no workers
/// falls back to local training, which requires exactly one shard.
///
/// Failures (worker errors, transport faults, sync patience timeouts) shut
/// the run down and come back in the report's error fields; the estimator
/// keeps the last parameters the server held.
TrainingReport run_distributed_training(const ClusterConfig& cluster, Estimator& e,
                                        const std::vector<Dataset>& shards,
                                        std::int64_t steps, DistMode mode,
                                        Transport& transport,
                                        const DistributedOptions& options = {});

}  // namespace tfln
