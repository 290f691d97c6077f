#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tfln/dataset.hpp"
#include "tfln/distributed.hpp"
#include "tfln/estimator.hpp"

namespace tfln {

/// Time source for the evaluation scheduler. Injected so throttle/delay
/// behavior is testable without wall-clock sleeps.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_seconds() = 0;
};

/// Monotonic wall clock.
class SystemClock : public Clock {
 public:
  double now_seconds() override;

 private:
  std::chrono::steady_clock::time_point origin_ = std::chrono::steady_clock::now();
};

/// Test clock. Every read advances time by `tick` (so observed timestamps are
/// strictly increasing); advance() jumps it forward explicitly.
class MockClock : public Clock {
 public:
  explicit MockClock(double start = 0.0, double tick = 1e-6)
      : now_(start), tick_(tick) {}

  double now_seconds() override {
    const double t = now_;
    now_ += tick_;
    return t;
  }

  void advance(double seconds) { now_ += seconds; }

 private:
  double now_;
  double tick_;
};

/// Where and how a trained model gets exported.
struct ExportStrategy {
  std::filesystem::path export_dir;
  std::uint32_t format_version = 1;
};

/// One evaluation (or deliberately skipped evaluation) in an experiment run.
struct EvalRecord {
  std::int64_t global_step = 0;
  std::map<std::string, double> metrics;
  double timestamp = 0.0;
  bool skipped = false;
  std::string skip_reason;
};

struct ExperimentOptions {
  std::int64_t train_steps = 1;
  std::int64_t min_eval_frequency = 1;
  double eval_delay_secs = 0.0;
  double eval_throttle_secs = 0.0;
  std::optional<std::size_t> batch_size;  // unset => full-batch training
  std::optional<std::set<Metric>> metrics;  // unset => the estimator's defaults
  std::optional<ExportStrategy> export_strategy;
  DistMode distributed_mode = DistMode::kSync;
};

/// Binds an estimator to train/eval inputs and drives training, scheduled
/// evaluation, and export. Training goes through estimator_fit locally, or
/// through the parameter-server runtime when the estimator's RunConfig
/// carries a cluster.
class Experiment {
 public:
  Experiment(Estimator estimator, Dataset train_input, Dataset eval_input,
             ExperimentOptions options, Clock* clock = nullptr);

  /// Trains for the configured number of steps. A checkpoint-saver hook is
  /// attached when the RunConfig sets save_checkpoints_steps.
  TrainingReport train();

  /// One evaluation over the eval input.
  EvalRecord evaluate();

  /// Trains in segments of min_eval_frequency steps, evaluating after each
  /// segment, subject to the delay and throttle windows; the final evaluation
  /// always runs. Skipped evaluations are recorded, not deferred.
  std::vector<EvalRecord> train_and_evaluate();

  /// Writes manifest.json plus a checkpoint into the directory; the export
  /// can be loaded by load_exported_model in a fresh process.
  std::filesystem::path export_model(const std::filesystem::path& dir);

  Estimator& estimator() { return estimator_; }
  const Estimator& estimator() const { return estimator_; }
  const Dataset& eval_input() const { return eval_input_; }

 private:
  TrainingReport train_segment(std::int64_t steps);
  EvalRecord evaluate_at(double timestamp);

  Estimator estimator_;
  Dataset train_input_;
  Dataset eval_input_;
  ExperimentOptions options_;
  SystemClock system_clock_;
  Clock* clock_;
  std::unique_ptr<InProcessTransport> transport_;
};

/// Writes the manifest + checkpoint pair for a fitted canned estimator.
/// Returns the manifest path. Custom estimators cannot be exported (their
/// model function is not serializable).
std::filesystem::path export_estimator(const Estimator& estimator,
                                       const std::filesystem::path& dir,
                                       std::uint32_t format_version = 1);

/// Rebuilds an estimator from an export directory; predictions are
/// bit-identical to the exporting estimator's.
Estimator load_exported_model(const std::filesystem::path& dir);

}  // namespace tfln
