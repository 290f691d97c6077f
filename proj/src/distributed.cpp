#include "tfln/distributed.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>

#include "tfln/error.hpp"

namespace tfln {

GradientMessage worker_step(std::uint32_t worker_id, const ModelFn& model_fn,
                            const Batch& batch, const ParamBroadcast& snapshot,
                            RngState& rng) {
  ParameterStore store;
  store.assign(snapshot.parameters);
  ModelFnOutput out = model_fn(batch.features, batch.targets, Mode::kTrain, store, rng);
  if (!out.train_op) {
    throw InternalError("worker " + std::to_string(worker_id) +
                        ": model function returned no train op");
  }
  for (const auto& [name, grad] : out.train_op->gradients) {
    if (!all_finite(grad)) {
      throw TrainingError("worker " + std::to_string(worker_id) +
                          ": non-finite gradient in '" + name + "' at basis step " +
                          std::to_string(snapshot.global_step));
    }
  }
  return {worker_id, snapshot.global_step, std::move(out.train_op->gradients)};
}

namespace {

/// The ps task: accepts one connection per worker and serializes gradient
/// handling over the shared state. Sync-mode handlers block on the barrier
/// until the round completes or patience runs out.
class ParameterServerTask {
 public:
  ParameterServerTask(Transport& transport, const std::string& address,
                      ParamServerState state, std::int64_t target_step,
                      std::chrono::milliseconds patience)
      : state_(std::move(state)), target_step_(target_step), patience_(patience) {
    listener_ = transport.listen(address);
  }

  ~ParameterServerTask() { stop(); }

  void start() {
    accept_thread_ = std::jthread([this] { accept_loop(); });
  }

  /// Idempotent; safe to call from the destructor.
  void stop() {
    listener_->close();
    if (accept_thread_.joinable()) accept_thread_.join();
    // The accept loop has exited, so the connection and handler lists are
    // final. Closing every connection and waking barrier waiters lets all
    // handlers drain.
    {
      std::lock_guard lock(mutex_);
      shutting_down_ = true;
      for (auto& conn : connections_) conn->close();
    }
    barrier_cv_.notify_all();
    for (std::jthread& t : handler_threads_) {
      if (t.joinable()) t.join();
    }
  }

  std::string address() const { return listener_->address(); }

  const ParamServerState& state() const { return state_; }

  bool failed() const {
    std::lock_guard lock(mutex_);
    return !error_code_.empty();
  }
  std::string error_code() const {
    std::lock_guard lock(mutex_);
    return error_code_;
  }
  std::string error_detail() const {
    std::lock_guard lock(mutex_);
    return error_detail_;
  }

 private:
  bool done_locked() const { return state_.global_step() >= target_step_; }

  void record_error(const std::string& code, const std::string& detail) {
    if (error_code_.empty()) {
      error_code_ = code;
      error_detail_ = detail;
    }
    barrier_cv_.notify_all();
  }

  void accept_loop() {
    try {
      while (std::unique_ptr<Connection> conn = listener_->accept()) {
        std::lock_guard lock(mutex_);
        connections_.push_back(std::shared_ptr<Connection>(std::move(conn)));
        handler_threads_.emplace_back(
            [this, c = connections_.back()] { serve(c); });
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      record_error("ps_error", e.what());
    }
  }

  void serve(const std::shared_ptr<Connection>& conn) {
    try {
      while (std::optional<WireMessage> msg = conn->recv()) {
        if (const auto* ctrl = std::get_if<ControlMessage>(&*msg)) {
          if (ctrl->kind == ControlKind::kPullRequest) {
            std::lock_guard lock(mutex_);
            if (done_locked()) {
              conn->send(ControlMessage{ControlKind::kStop, ""});
            } else {
              conn->send(state_.snapshot());
            }
          }
          // Other control kinds are replies; a worker never sends them.
        } else if (const auto* grad = std::get_if<GradientMessage>(&*msg)) {
          handle_gradient(conn, *grad);
        }
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      record_error("ps_error", e.what());
    }
  }

  void handle_gradient(const std::shared_ptr<Connection>& conn,
                       const GradientMessage& grad) {
    std::unique_lock lock(mutex_);
    if (done_locked()) {
      conn->send(ControlMessage{ControlKind::kStop, ""});
      return;
    }
    const PsApplyResult result = state_.apply(grad);
    switch (result.status) {
      case PsApplyResult::Status::kStale:
        conn->send(ControlMessage{ControlKind::kStaleGradient,
                                  "server is at step " +
                                      std::to_string(result.global_step)});
        return;
      case PsApplyResult::Status::kApplied: {
        ++completed_rounds_;
        last_broadcast_ = *result.broadcast;
        barrier_cv_.notify_all();
        reply_after_round(conn, lock);
        return;
      }
      case PsApplyResult::Status::kBuffered: {
        const std::int64_t my_round = completed_rounds_;
        // system_clock deadline: maps to pthread_cond_timedwait.
        const auto deadline = std::chrono::system_clock::now() + patience_;
        const bool completed = barrier_cv_.wait_until(lock, deadline, [&] {
          return completed_rounds_ > my_round || !error_code_.empty() ||
                 shutting_down_;
        });
        if (shutting_down_) return;
        if (!completed || !error_code_.empty()) {
          if (error_code_.empty()) {
            record_error("sync_patience_timeout",
                         "sync barrier at step " +
                             std::to_string(state_.global_step()) + " waited " +
                             std::to_string(patience_.count()) +
                             " ms without hearing from all workers");
          }
          conn->send(ControlMessage{ControlKind::kError, error_detail_});
          return;
        }
        reply_after_round(conn, lock);
        return;
      }
    }
  }

  /// Reply to a worker whose round just completed: fresh parameters, or stop
  /// once the target step is reached.
  void reply_after_round(const std::shared_ptr<Connection>& conn,
                         std::unique_lock<std::mutex>& lock) {
    if (state_.mode() == DistMode::kSync && done_locked()) {
      conn->send(ControlMessage{ControlKind::kStop, ""});
      return;
    }
    conn->send(last_broadcast_);
    (void)lock;
  }

  std::unique_ptr<Listener> listener_;
  ParamServerState state_;
  std::int64_t target_step_;
  std::chrono::milliseconds patience_;

  mutable std::mutex mutex_;
  std::condition_variable barrier_cv_;
  std::int64_t completed_rounds_ = 0;
  bool shutting_down_ = false;
  ParamBroadcast last_broadcast_;
  std::string error_code_;
  std::string error_detail_;

  std::jthread accept_thread_;
  std::vector<std::jthread> handler_threads_;
  std::vector<std::shared_ptr<Connection>> connections_;
};

struct WorkerOutcome {
  std::uint32_t worker_id = 0;
  std::int64_t confirmed_steps = 0;
  bool ok = true;
  std::string error_code;
  std::string error_detail;
};

WorkerOutcome run_worker(Transport& transport, const std::string& ps_address,
                         std::uint32_t worker_id, const ModelFn& model_fn,
                         const Dataset& shard, std::optional<std::int64_t> budget,
                         std::uint64_t seed) {
  WorkerOutcome outcome;
  outcome.worker_id = worker_id;
  RngState rng(seed);
  const Batch batch{shard.features, shard.targets, 0, 0};
  try {
    std::unique_ptr<Connection> conn = transport.connect(ps_address);

    auto pull = [&]() -> std::optional<ParamBroadcast> {
      conn->send(ControlMessage{ControlKind::kPullRequest, ""});
      std::optional<WireMessage> reply = conn->recv();
      if (!reply) {
        throw TransportError("worker " + std::to_string(worker_id) +
                             ": connection closed during pull");
      }
      if (auto* bcast = std::get_if<ParamBroadcast>(&*reply)) return std::move(*bcast);
      if (auto* ctrl = std::get_if<ControlMessage>(&*reply)) {
        if (ctrl->kind == ControlKind::kStop) return std::nullopt;
        if (ctrl->kind == ControlKind::kError) throw TrainingError(ctrl->detail);
      }
      throw InternalError("worker " + std::to_string(worker_id) +
                          ": unexpected reply to pull");
    };

    std::optional<ParamBroadcast> snapshot = pull();
    while (snapshot) {
      if (budget && outcome.confirmed_steps >= *budget) break;
      GradientMessage grads = worker_step(worker_id, model_fn, batch, *snapshot, rng);
      conn->send(grads);
      std::optional<WireMessage> reply = conn->recv();
      if (!reply) {
        throw TransportError("worker " + std::to_string(worker_id) +
                             ": connection closed awaiting push reply");
      }
      if (auto* bcast = std::get_if<ParamBroadcast>(&*reply)) {
        snapshot = std::move(*bcast);
        ++outcome.confirmed_steps;
        continue;
      }
      const auto& ctrl = std::get<ControlMessage>(*reply);
      if (ctrl.kind == ControlKind::kStop) break;
      if (ctrl.kind == ControlKind::kStaleGradient) {
        snapshot = pull();
        continue;
      }
      if (ctrl.kind == ControlKind::kError) throw TrainingError(ctrl.detail);
      throw InternalError("worker " + std::to_string(worker_id) +
                          ": unexpected reply to push");
    }
    conn->close();
  } catch (const TransportError& e) {
    outcome.ok = false;
    outcome.error_code = "transport_error";
    outcome.error_detail = e.what();
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error_code = "worker_error";
    outcome.error_detail = e.what();
  }
  return outcome;
}

}  // namespace

TrainingReport run_distributed_training(const ClusterConfig& cluster, Estimator& e,
                                        const std::vector<Dataset>& shards,
                                        std::int64_t steps, DistMode mode,
                                        Transport& transport,
                                        const DistributedOptions& options) {
  validate_cluster(cluster);
  if (steps < 1) {
    throw ValidationError("distributed training: steps must be >= 1");
  }
  const std::vector<TaskSpec> workers = cluster.tasks_with_role(TaskRole::kWorker);

  TrainingReport report;
  if (workers.empty()) {
    // Master-only cluster: plain local training over the single shard.
    if (shards.size() != 1) {
      throw ValidationError("local fallback requires exactly one data shard, got " +
                            std::to_string(shards.size()));
    }
    const FitReport fit = e.fit(shards[0].features, shards[0].targets, steps);
    report.mode = "local";
    report.final_global_step = fit.global_step;
    report.applied_updates = fit.steps_executed;
    return report;
  }

  if (shards.size() != workers.size()) {
    throw ValidationError("distributed training: " + std::to_string(shards.size()) +
                          " shards for " + std::to_string(workers.size()) + " workers");
  }
  for (std::size_t i = 0; i < shards.size(); ++i) {
    if (shards[i].n() == 0) {
      throw ValidationError("distributed training: shard " + std::to_string(i) +
                            " is empty");
    }
  }

  e.ensure_prepared(shards[0].features, shards[0].targets);
  const std::int64_t start_step = e.global_step();
  const std::int64_t target_step = start_step + steps;

  const std::string ps_address = cluster.tasks_with_role(TaskRole::kPs)[0].address;
  ParameterServerTask server(
      transport, ps_address,
      ParamServerState(e.parameters().tensors(), *e.optimizer_binding(), mode,
                       workers.size(), start_step, e.adagrad_state()),
      target_step, options.sync_patience);
  server.start();

  // Async workers carry fixed step budgets that partition `steps`; sync
  // workers run until the server says stop.
  std::vector<WorkerOutcome> outcomes(workers.size());
  try {
    std::vector<std::jthread> threads;
    threads.reserve(workers.size());
    for (std::size_t i = 0; i < workers.size(); ++i) {
      std::optional<std::int64_t> budget;
      if (mode == DistMode::kAsync) {
        const auto w = static_cast<std::int64_t>(workers.size());
        budget = steps / w + (static_cast<std::int64_t>(i) < steps % w ? 1 : 0);
      }
      const std::uint64_t worker_seed =
          e.config().random_seed + 1000003ull * (static_cast<std::uint64_t>(i) + 1);
      threads.emplace_back([&, i, budget, worker_seed] {
        outcomes[i] = run_worker(transport, server.address(),
                                 static_cast<std::uint32_t>(i), e.model_fn(),
                                 shards[i], budget, worker_seed);
      });
    }
  } catch (...) {
    // Unblock any already-launched workers before the jthreads join.
    server.stop();
    throw;
  }
  server.stop();

  const ParamServerState& final_state = server.state();
  report.mode = to_string(mode);
  report.final_global_step = final_state.global_step();
  report.applied_updates = final_state.applied_updates();
  report.per_worker_steps = final_state.per_worker_applied();
  e.adopt_training_result(final_state.parameters(), final_state.global_step(),
                          final_state.adagrad_state());

  if (server.failed()) {
    report.ok = false;
    report.error_code = server.error_code();
    report.error_detail = server.error_detail();
  }
  for (const WorkerOutcome& outcome : outcomes) {
    if (!outcome.ok && report.ok) {
      report.ok = false;
      report.error_code = outcome.error_code;
      report.error_detail = outcome.error_detail;
    }
  }
  return report;
}

}  // namespace tfln
