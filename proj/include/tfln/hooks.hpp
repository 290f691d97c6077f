#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tfln/checkpoint.hpp"

namespace tfln {

enum class HookEventKind { kSessionStart, kBeforeRun, kAfterRun, kSessionEnd };

/// One lifecycle notification. `loss` is populated only on after_run.
struct HookEvent {
  HookEventKind kind;
  std::int64_t global_step = 0;
  std::optional<double> loss;
};

/// Mutable view of the running session handed to every hook. Setting
/// stop_requested halts the loop before the next step; it never resets.
/// make_checkpoint snapshots the current parameters and global step.
struct RunContext {
  std::int64_t global_step = 0;
  bool stop_requested = false;
  std::function<Checkpoint()> make_checkpoint;
};

/// Observer over training-lifecycle events: session start/end and
/// before/after every optimizer step. Hooks run serially on the training
/// thread, in registration order.
class SessionHook {
 public:
  virtual ~SessionHook() = default;
  virtual void on_event(const HookEvent& event, RunContext& ctx) = 0;
};

/// Delivers events to an ordered hook list while enforcing the lifecycle
/// grammar: session_start (before_run after_run)* session_end. An
/// out-of-order event means the training loop itself is broken, so it raises
/// InternalError rather than a user-facing one.
class HookDispatcher {
 public:
  explicit HookDispatcher(std::vector<SessionHook*> hooks);

  void dispatch(const HookEvent& event, RunContext& ctx);

 private:
  enum class State { kIdle, kOpen, kInStep, kDone };
  std::vector<SessionHook*> hooks_;
  State state_ = State::kIdle;
};

/// Requests stop on the first after_run whose global_step >= last_step.
class StopAtStepHook : public SessionHook {
 public:
  explicit StopAtStepHook(std::int64_t last_step);
  void on_event(const HookEvent& event, RunContext& ctx) override;

 private:
  std::int64_t last_step_;
};

/// Saves `ckpt-<global_step>` after every save_steps-th step and once more at
/// session end if the final step was not already on the cadence.
class CheckpointSaverHook : public SessionHook {
 public:
  CheckpointSaverHook(std::int64_t save_steps, std::filesystem::path dir);
  void on_event(const HookEvent& event, RunContext& ctx) override;

 private:
  void save(RunContext& ctx);

  std::int64_t save_steps_;
  std::filesystem::path dir_;
  std::int64_t last_saved_step_ = -1;
};

using LineSink = std::function<void(const std::string&)>;

/// Emits `step=<n> loss=<v>` every every_n_steps steps, and for the final
/// step even when it falls off the cadence.
class LoggingHook : public SessionHook {
 public:
  LoggingHook(std::int64_t every_n_steps, LineSink sink);
  void on_event(const HookEvent& event, RunContext& ctx) override;

 private:
  void emit(std::int64_t step, double loss);

  std::int64_t every_n_steps_;
  LineSink sink_;
  std::int64_t last_step_ = 0;
  std::int64_t last_logged_step_ = -1;
  double last_loss_ = 0.0;
};

/// Formats a value with 6 significant digits, the format used by log lines
/// and CLI metric output.
std::string format_metric_value(double value);

}  // namespace tfln
