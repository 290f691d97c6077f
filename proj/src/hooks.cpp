#include "tfln/hooks.hpp"

#include <cstdio>

#include "tfln/error.hpp"

namespace tfln {

HookDispatcher::HookDispatcher(std::vector<SessionHook*> hooks)
    : hooks_(std::move(hooks)) {}

void HookDispatcher::dispatch(const HookEvent& event, RunContext& ctx) {
  switch (event.kind) {
    case HookEventKind::kSessionStart:
      if (state_ != State::kIdle) throw InternalError("hooks: session_start out of order");
      state_ = State::kOpen;
      break;
    case HookEventKind::kBeforeRun:
      if (state_ != State::kOpen) throw InternalError("hooks: before_run out of order");
      state_ = State::kInStep;
      break;
    case HookEventKind::kAfterRun:
      if (state_ != State::kInStep) throw InternalError("hooks: after_run out of order");
      state_ = State::kOpen;
      break;
    case HookEventKind::kSessionEnd:
      if (state_ != State::kOpen) throw InternalError("hooks: session_end out of order");
      state_ = State::kDone;
      break;
  }
  for (SessionHook* hook : hooks_) {
    hook->on_event(event, ctx);
  }
}

StopAtStepHook::StopAtStepHook(std::int64_t last_step) : last_step_(last_step) {
  if (last_step < 1) {
    throw ValidationError("StopAtStepHook: last_step must be >= 1");
  }
}

void StopAtStepHook::on_event(const HookEvent& event, RunContext& ctx) {
  if (event.kind == HookEventKind::kAfterRun && event.global_step >= last_step_) {
    ctx.stop_requested = true;
  }
}

CheckpointSaverHook::CheckpointSaverHook(std::int64_t save_steps,
                                         std::filesystem::path dir)
    : save_steps_(save_steps), dir_(std::move(dir)) {
  if (save_steps < 1) {
    throw ValidationError("CheckpointSaverHook: save_steps must be >= 1");
  }
}

void CheckpointSaverHook::save(RunContext& ctx) {
  if (!ctx.make_checkpoint) {
    throw InternalError("CheckpointSaverHook: run context has no checkpoint source");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  const Checkpoint ckpt = ctx.make_checkpoint();
  checkpoint_save(ckpt, dir_ / checkpoint_file_name(ckpt.global_step));
  last_saved_step_ = ckpt.global_step;
}

void CheckpointSaverHook::on_event(const HookEvent& event, RunContext& ctx) {
  if (event.kind == HookEventKind::kAfterRun && event.global_step % save_steps_ == 0) {
    save(ctx);
  } else if (event.kind == HookEventKind::kSessionEnd &&
             event.global_step != last_saved_step_) {
    save(ctx);
  }
}

LoggingHook::LoggingHook(std::int64_t every_n_steps, LineSink sink)
    : every_n_steps_(every_n_steps), sink_(std::move(sink)) {
  if (every_n_steps < 1) {
    throw ValidationError("LoggingHook: every_n_steps must be >= 1");
  }
}

void LoggingHook::emit(std::int64_t step, double loss) {
  sink_("step=" + std::to_string(step) + " loss=" + format_metric_value(loss));
  last_logged_step_ = step;
}

void LoggingHook::on_event(const HookEvent& event, RunContext& ctx) {
  (void)ctx;
  if (event.kind == HookEventKind::kAfterRun) {
    last_step_ = event.global_step;
    last_loss_ = event.loss.value_or(0.0);
    if (event.global_step % every_n_steps_ == 0) {
      emit(event.global_step, last_loss_);
    }
  } else if (event.kind == HookEventKind::kSessionEnd) {
    // Progress reports always end with the final loss.
    if (last_step_ > 0 && last_logged_step_ != last_step_) {
      emit(last_step_, last_loss_);
    }
  }
}

std::string format_metric_value(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

}  // namespace tfln
