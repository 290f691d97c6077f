#include "tfln/experiment.hpp"

#include <fstream>

#include <json.hpp>

#include "tfln/error.hpp"
#include "tfln/feeding_queue.hpp"

namespace tfln {

using nlohmann::json;

double SystemClock::now_seconds() {
  const auto elapsed = std::chrono::steady_clock::now() - origin_;
  return std::chrono::duration<double>(elapsed).count();
}

Experiment::Experiment(Estimator estimator, Dataset train_input, Dataset eval_input,
                       ExperimentOptions options, Clock* clock)
    : estimator_(std::move(estimator)),
      train_input_(std::move(train_input)),
      eval_input_(std::move(eval_input)),
      options_(std::move(options)),
      clock_(clock ? clock : &system_clock_) {
  if (options_.train_steps < 1) {
    throw ValidationError("experiment: train_steps must be >= 1");
  }
  if (options_.eval_delay_secs < 0.0 || options_.eval_throttle_secs < 0.0) {
    throw ValidationError("experiment: delay and throttle must be >= 0");
  }
  if (train_input_.n() == 0) {
    throw ValidationError("experiment: empty training input");
  }
}

TrainingReport Experiment::train() { return train_segment(options_.train_steps); }

TrainingReport Experiment::train_segment(std::int64_t steps) {
  const RunConfig& config = estimator_.config();
  const bool distributed =
      config.cluster && config.cluster->count_role(TaskRole::kWorker) > 0;

  if (distributed) {
    if (!transport_) transport_ = std::make_unique<InProcessTransport>();
    const std::size_t n_workers = config.cluster->count_role(TaskRole::kWorker);
    // Contiguous near-equal shards, one per worker.
    std::vector<Dataset> shards;
    const std::size_t n = train_input_.n();
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * n / n_workers;
      const std::size_t end = (w + 1) * n / n_workers;
      std::vector<std::size_t> rows;
      for (std::size_t i = begin; i < end; ++i) rows.push_back(i);
      shards.push_back(train_input_.select_rows(rows));
    }
    return run_distributed_training(*config.cluster, estimator_, shards, steps,
                                    options_.distributed_mode, *transport_);
  }

  std::vector<SessionHook*> hooks;
  std::optional<CheckpointSaverHook> saver;
  if (config.save_checkpoints_steps) {
    if (config.model_dir.empty()) {
      throw ValidationError("experiment: save_checkpoints_steps requires model_dir");
    }
    saver.emplace(*config.save_checkpoints_steps, config.model_dir);
    hooks.push_back(&*saver);
  }

  FitReport fit;
  if (options_.batch_size) {
    DatasetBatchIterator iterator(train_input_, *options_.batch_size, true,
                                  config.random_seed);
    FeedingQueue queue(4);
    // num_cores bounds the producer thread count.
    FeederHandle feeder = start_feeding(queue, iterator, config.num_cores);
    QueueBatchSource stream(queue);
    try {
      fit = estimator_.fit(stream, steps, hooks);
    } catch (...) {
      // Producers may be blocked on a full queue; close it so the feeder's
      // join (in its destructor) cannot hang.
      queue.close();
      throw;
    }
    queue.close();
    feeder.join();
  } else {
    fit = estimator_.fit(train_input_.features, train_input_.targets, steps, hooks);
  }

  TrainingReport report;
  report.mode = "local";
  report.final_global_step = fit.global_step;
  report.applied_updates = fit.steps_executed;
  return report;
}

EvalRecord Experiment::evaluate() { return evaluate_at(clock_->now_seconds()); }

EvalRecord Experiment::evaluate_at(double timestamp) {
  if (eval_input_.n() == 0) {
    throw ValidationError("experiment: empty evaluation input");
  }
  const std::set<Metric> metrics =
      options_.metrics ? *options_.metrics : estimator_.default_metrics();
  EvalRecord record;
  record.global_step = estimator_.global_step();
  record.metrics =
      estimator_.evaluate(eval_input_.features, eval_input_.targets, metrics);
  record.timestamp = timestamp;
  return record;
}

std::vector<EvalRecord> Experiment::train_and_evaluate() {
  if (options_.min_eval_frequency < 1) {
    throw ValidationError("experiment: min_eval_frequency must be >= 1");
  }
  std::vector<EvalRecord> records;
  const double start = clock_->now_seconds();
  double last_eval_time = start;

  std::int64_t trained = 0;
  while (trained < options_.train_steps) {
    const std::int64_t segment =
        std::min(options_.min_eval_frequency, options_.train_steps - trained);
    train_segment(segment);
    trained += segment;
    const double now = clock_->now_seconds();
    const bool at_end = trained == options_.train_steps;

    if (at_end) {
      // The final evaluation always runs.
      records.push_back(evaluate_at(now));
    } else if (now - start < options_.eval_delay_secs) {
      EvalRecord skip;
      skip.global_step = estimator_.global_step();
      skip.timestamp = now;
      skip.skipped = true;
      skip.skip_reason = "delay";
      records.push_back(skip);
    } else if (now - last_eval_time < options_.eval_throttle_secs) {
      EvalRecord skip;
      skip.global_step = estimator_.global_step();
      skip.timestamp = now;
      skip.skipped = true;
      skip.skip_reason = "throttle";
      records.push_back(skip);
    } else {
      records.push_back(evaluate_at(now));
      last_eval_time = now;
    }
  }

  if (options_.export_strategy) {
    export_estimator(estimator_, options_.export_strategy->export_dir,
                     options_.export_strategy->format_version);
  }
  return records;
}

std::filesystem::path Experiment::export_model(const std::filesystem::path& dir) {
  const std::uint32_t version =
      options_.export_strategy ? options_.export_strategy->format_version : 1;
  return export_estimator(estimator_, dir, version);
}

std::filesystem::path export_estimator(const Estimator& estimator,
                                       const std::filesystem::path& dir,
                                       std::uint32_t format_version) {
  if (estimator.parameters().empty()) {
    throw StateError("export: estimator has no parameters; fit or restore first");
  }
  const ArchitectureInfo& arch = estimator.architecture();
  if (arch.kind == ModelKind::kCustom) {
    throw ValidationError("export: custom model functions cannot be exported");
  }
  if (format_version != 1) {
    throw ValidationError("export: unsupported format version " +
                          std::to_string(format_version));
  }

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("export: cannot create directory " + dir.string());
  }

  const std::string ckpt_name = checkpoint_file_name(estimator.global_step());
  estimator.save_checkpoint(dir / ckpt_name);

  json manifest;
  manifest["format_version"] = format_version;
  manifest["model_kind"] = to_string(arch.kind);
  manifest["n_features"] = arch.n_features;
  manifest["n_classes"] = arch.n_classes ? json(*arch.n_classes) : json(nullptr);
  manifest["hidden_units"] =
      arch.kind == ModelKind::kDnnClassifier ? json(arch.hidden_units) : json(nullptr);
  manifest["checkpoint"] = ckpt_name;
  json metric_names = json::array();
  for (const Metric metric : estimator.default_metrics()) {
    metric_names.push_back(to_string(metric));
  }
  manifest["metrics"] = std::move(metric_names);

  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) {
    throw IoError("export: cannot write " + manifest_path.string());
  }
  out << manifest.dump(2) << "\n";
  return manifest_path;
}

Estimator load_exported_model(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) {
    throw IoError("load: cannot open " + manifest_path.string());
  }
  json manifest;
  try {
    in >> manifest;
  } catch (const json::parse_error& e) {
    throw ParseError("load: bad manifest: " + std::string(e.what()));
  }
  if (!manifest.contains("format_version") ||
      manifest["format_version"] != json(1)) {
    throw FormatError("load: unsupported export format version " +
                      manifest.value("format_version", json()).dump());
  }

  const ModelKind kind =
      model_kind_from_string(manifest.value("model_kind", std::string()));
  const auto n_features = manifest.value("n_features", std::size_t{0});
  if (n_features == 0) {
    throw FormatError("load: manifest has no n_features");
  }
  std::vector<FeatureColumn> columns;
  for (std::size_t j = 0; j < n_features; ++j) {
    columns.push_back({"feature_" + std::to_string(j), FeatureColumn::Kind::kRealValued, 1});
  }

  Estimator estimator = [&]() -> Estimator {
    switch (kind) {
      case ModelKind::kDnnClassifier: {
        if (!manifest.contains("hidden_units") || !manifest["hidden_units"].is_array()) {
          throw FormatError("load: dnn_classifier manifest has no hidden_units");
        }
        const auto hidden = manifest["hidden_units"].get<std::vector<std::size_t>>();
        const auto n_classes = manifest.value("n_classes", std::size_t{0});
        return Estimator::dnn_classifier(columns, hidden, n_classes, {}, 0);
      }
      case ModelKind::kLinearRegressor:
        return Estimator::linear_regressor(columns, {}, 0);
      case ModelKind::kLinearClassifier:
        return Estimator::linear_classifier(
            columns, manifest.value("n_classes", std::size_t{0}), {}, 0);
      case ModelKind::kLogisticRegressor:
        return Estimator::logistic_regressor(columns, {}, 0);
      case ModelKind::kCustom:
        break;
    }
    throw FormatError("load: cannot rebuild a custom model from an export");
  }();

  const std::string ckpt_name = manifest.value("checkpoint", std::string());
  if (ckpt_name.empty()) {
    throw FormatError("load: manifest has no checkpoint entry");
  }
  estimator.restore_checkpoint(dir / ckpt_name);
  return estimator;
}

}  // namespace tfln
