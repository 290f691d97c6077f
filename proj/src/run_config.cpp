#include "tfln/run_config.hpp"

#include <set>
#include <utility>

#include <json.hpp>

#include "tfln/error.hpp"

namespace tfln {

using nlohmann::json;

std::string to_string(TaskRole role) {
  switch (role) {
    case TaskRole::kMaster: return "master";
    case TaskRole::kWorker: return "worker";
    case TaskRole::kPs: return "ps";
  }
  return "?";
}

TaskRole task_role_from_string(const std::string& name) {
  if (name == "master") return TaskRole::kMaster;
  if (name == "worker") return TaskRole::kWorker;
  if (name == "ps") return TaskRole::kPs;
  throw ConfigError("bad_role", "config: unknown task role '" + name + "'");
}

std::vector<TaskSpec> ClusterConfig::tasks_with_role(TaskRole role) const {
  std::vector<TaskSpec> out;
  for (const TaskSpec& task : tasks) {
    if (task.role == role) out.push_back(task);
  }
  return out;
}

std::size_t ClusterConfig::count_role(TaskRole role) const {
  std::size_t n = 0;
  for (const TaskSpec& task : tasks) {
    if (task.role == role) ++n;
  }
  return n;
}

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    if (!allowed.contains(item.key())) {
      throw ConfigError("unknown_key",
                        "config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

ClusterConfig parse_cluster(const json& obj) {
  if (!obj.is_object()) {
    throw ConfigError("bad_type", "config: 'cluster' must be an object");
  }
  reject_unknown_keys(obj, {"tasks", "this_task"}, "cluster");
  if (!obj.contains("tasks") || !obj["tasks"].is_array()) {
    throw ConfigError("bad_type", "config: 'cluster.tasks' must be an array");
  }
  ClusterConfig cluster;
  for (const json& t : obj["tasks"]) {
    if (!t.is_object()) {
      throw ConfigError("bad_type", "config: cluster task entries must be objects");
    }
    reject_unknown_keys(t, {"role", "index", "address"}, "cluster task");
    TaskSpec task;
    task.role = task_role_from_string(t.value("role", std::string()));
    if (!t.contains("index") || !t["index"].is_number_unsigned()) {
      throw ConfigError("bad_type", "config: task 'index' must be a non-negative integer");
    }
    task.index = t["index"].get<std::size_t>();
    if (!t.contains("address") || !t["address"].is_string()) {
      throw ConfigError("bad_type", "config: task 'address' must be a string");
    }
    task.address = t["address"].get<std::string>();
    cluster.tasks.push_back(std::move(task));
  }
  if (obj.contains("this_task")) {
    if (!obj["this_task"].is_number_unsigned()) {
      throw ConfigError("bad_type", "config: 'this_task' must be a non-negative integer");
    }
    cluster.this_task = obj["this_task"].get<std::size_t>();
  }
  validate_cluster(cluster);
  return cluster;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("bad_json", std::string("config: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError("bad_type", "config: document must be a JSON object");
  }
  reject_unknown_keys(doc,
                      {"num_cores", "gpu_memory_fraction", "random_seed",
                       "save_checkpoints_steps", "model_dir", "cluster"},
                      "document");
  RunConfig config;
  if (doc.contains("num_cores")) {
    if (!doc["num_cores"].is_number_unsigned() || doc["num_cores"].get<std::size_t>() == 0) {
      throw ConfigError("bad_value", "config: 'num_cores' must be an integer >= 1");
    }
    config.num_cores = doc["num_cores"].get<std::size_t>();
  }
  if (doc.contains("gpu_memory_fraction")) {
    if (!doc["gpu_memory_fraction"].is_number()) {
      throw ConfigError("bad_value", "config: 'gpu_memory_fraction' must be a number");
    }
    const double f = doc["gpu_memory_fraction"].get<double>();
    if (!(f > 0.0) || f > 1.0) {
      throw ConfigError("bad_value",
                        "config: 'gpu_memory_fraction' must be in (0, 1]");
    }
    config.gpu_memory_fraction = f;
  }
  if (doc.contains("random_seed")) {
    if (!doc["random_seed"].is_number_unsigned()) {
      throw ConfigError("bad_value",
                        "config: 'random_seed' must be a non-negative integer");
    }
    config.random_seed = doc["random_seed"].get<std::uint64_t>();
  }
  if (doc.contains("save_checkpoints_steps")) {
    if (!doc["save_checkpoints_steps"].is_number_unsigned() ||
        doc["save_checkpoints_steps"].get<std::int64_t>() < 1) {
      throw ConfigError("bad_value",
                        "config: 'save_checkpoints_steps' must be an integer >= 1");
    }
    config.save_checkpoints_steps = doc["save_checkpoints_steps"].get<std::int64_t>();
  }
  if (doc.contains("model_dir")) {
    if (!doc["model_dir"].is_string()) {
      throw ConfigError("bad_value", "config: 'model_dir' must be a string");
    }
    config.model_dir = doc["model_dir"].get<std::string>();
  }
  if (doc.contains("cluster")) {
    config.cluster = parse_cluster(doc["cluster"]);
  }
  return config;
}

std::string serialize_run_config(const RunConfig& config) {
  json doc;
  doc["num_cores"] = config.num_cores;
  doc["gpu_memory_fraction"] = config.gpu_memory_fraction;
  doc["random_seed"] = config.random_seed;
  if (config.save_checkpoints_steps) {
    doc["save_checkpoints_steps"] = *config.save_checkpoints_steps;
  }
  if (!config.model_dir.empty()) {
    doc["model_dir"] = config.model_dir;
  }
  if (config.cluster) {
    json tasks = json::array();
    for (const TaskSpec& task : config.cluster->tasks) {
      tasks.push_back({{"role", to_string(task.role)},
                       {"index", task.index},
                       {"address", task.address}});
    }
    doc["cluster"] = {{"tasks", std::move(tasks)},
                      {"this_task", config.cluster->this_task}};
  }
  return doc.dump(2);
}

void validate_cluster(const ClusterConfig& cluster) {
  std::size_t masters = 0;
  std::set<std::string> addresses;
  std::set<std::pair<int, std::size_t>> role_indices;
  for (const TaskSpec& task : cluster.tasks) {
    if (task.role == TaskRole::kMaster) ++masters;
    if (masters > 1) {
      throw ConfigError("duplicate_master", "cluster: more than one master task");
    }
    if (!addresses.insert(task.address).second) {
      throw ConfigError("duplicate_address",
                        "cluster: duplicate address '" + task.address + "'");
    }
    if (!role_indices.insert({static_cast<int>(task.role), task.index}).second) {
      throw ConfigError("duplicate_task",
                        "cluster: duplicate (role, index) = (" + to_string(task.role) +
                            ", " + std::to_string(task.index) + ")");
    }
  }
  if (masters == 0) {
    throw ConfigError("no_master", "cluster: exactly one master task is required");
  }
  if (cluster.count_role(TaskRole::kWorker) > 0 && cluster.count_role(TaskRole::kPs) == 0) {
    throw ConfigError("workers_require_ps",
                      "cluster: workers require at least one parameter server");
  }
  if (cluster.this_task >= cluster.tasks.size()) {
    throw ConfigError("bad_this_task",
                      "cluster: this_task " + std::to_string(cluster.this_task) +
                          " out of range (have " + std::to_string(cluster.tasks.size()) +
                          " tasks)");
  }
}

}  // namespace tfln
