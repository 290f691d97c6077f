#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tfln {

enum class TaskRole { kMaster, kWorker, kPs };

std::string to_string(TaskRole role);
TaskRole task_role_from_string(const std::string& name);

/// One task in a cluster: role, index within that role, and its address.
struct TaskSpec {
  TaskRole role = TaskRole::kMaster;
  std::size_t index = 0;
  std::string address;

  bool operator==(const TaskSpec&) const = default;
};

/// The cluster role map: every task plus which one this process is.
struct ClusterConfig {
  std::vector<TaskSpec> tasks;
  std::size_t this_task = 0;

  std::vector<TaskSpec> tasks_with_role(TaskRole role) const;
  std::size_t count_role(TaskRole role) const;

  bool operator==(const ClusterConfig&) const = default;
};

/// Run-time knobs for an estimator run.
///
/// gpu_memory_fraction is accepted and stored but has no behavior; there is
/// no GPU in this implementation. num_cores bounds the number of data-feeding
/// producer threads.
struct RunConfig {
  std::size_t num_cores = 1;
  double gpu_memory_fraction = 1.0;  // inert
  std::uint64_t random_seed = 42;
  std::optional<std::int64_t> save_checkpoints_steps;
  std::string model_dir;
  std::optional<ClusterConfig> cluster;

  bool operator==(const RunConfig&) const = default;
};

/// Parses the strict JSON configuration document. Unknown keys are rejected.
/// Defaults: num_cores=1, random_seed=42, gpu_memory_fraction=1.0.
RunConfig parse_run_config(const std::string& text);

/// Inverse of parse_run_config; parse(serialize(parse(x))) == parse(x).
std::string serialize_run_config(const RunConfig& config);

/// Enforces the cluster invariants. Error codes (via ConfigError::code):
///   no_master, duplicate_master, duplicate_address, duplicate_task,
///   workers_require_ps, bad_this_task.
void validate_cluster(const ClusterConfig& cluster);

}  // namespace tfln
