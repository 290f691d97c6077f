#include <doctest.h>

#include <cmath>

#include "tfln/distributed.hpp"
#include "tfln/error.hpp"
#include "tfln/iris_data.hpp"
#include "testutil.hpp"

using namespace tfln;

namespace {

std::vector<FeatureColumn> columns_1d() {
  return {{"feature_0", FeatureColumn::Kind::kRealValued, 1}};
}

std::map<std::string, Tensor> single_param(double v) {
  return {{"w", Tensor(1, 1, v)}};
}

GradientMessage grad_msg(std::uint32_t worker, std::uint64_t basis, double g) {
  return {worker, basis, {{"w", Tensor(1, 1, g)}}};
}

ClusterConfig make_cluster(std::size_t n_workers) {
  ClusterConfig cluster;
  cluster.tasks.push_back({TaskRole::kMaster, 0, "master:0"});
  for (std::size_t i = 0; i < n_workers; ++i) {
    cluster.tasks.push_back({TaskRole::kWorker, i, "worker:" + std::to_string(i)});
  }
  cluster.tasks.push_back({TaskRole::kPs, 0, "ps:0"});
  return cluster;
}

/// Deterministic toy regression data.
Dataset toy_regression(std::size_t n, std::uint64_t seed) {
  RngState rng(seed);
  Dataset ds;
  ds.features = Tensor(n, 1);
  ds.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.features(i, 0) = rng.uniform(-1.0, 1.0);
    ds.targets[i] = 2.0 * ds.features(i, 0) + 1.0;
  }
  ds.schema = infer_real_valued_columns(ds.features);
  return ds;
}

Dataset first_half(const Dataset& ds) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.n() / 2; ++i) rows.push_back(i);
  return ds.select_rows(rows);
}

Dataset second_half(const Dataset& ds) {
  std::vector<std::size_t> rows;
  for (std::size_t i = ds.n() / 2; i < ds.n(); ++i) rows.push_back(i);
  return ds.select_rows(rows);
}

}  // namespace

TEST_CASE("sync ps averages the two workers' gradients into one update") {
  ParamServerState ps(single_param(1.0), {OptimizerKind::kSgd, 0.1}, DistMode::kSync, 2);

  const PsApplyResult first = ps.apply(grad_msg(0, 0, 0.4));
  CHECK(first.status == PsApplyResult::Status::kBuffered);
  CHECK(ps.parameters().at("w")(0, 0) == 1.0);  // barrier: no update yet
  CHECK(ps.global_step() == 0);

  const PsApplyResult second = ps.apply(grad_msg(1, 0, 0.8));
  CHECK(second.status == PsApplyResult::Status::kApplied);
  // w = 1 - 0.1 * (0.4 + 0.8)/2
  CHECK(ps.parameters().at("w")(0, 0) == doctest::Approx(0.94).epsilon(1e-15));
  CHECK(ps.global_step() == 1);
  CHECK(second.broadcast->global_step == 1);
  CHECK(ps.applied_updates() == 1);
}

TEST_CASE("sync averaging is independent of arrival order") {
  auto run = [](bool swap) {
    ParamServerState ps(single_param(1.0), {OptimizerKind::kSgd, 0.1}, DistMode::kSync,
                        2);
    if (swap) {
      ps.apply(grad_msg(1, 0, 0.8));
      ps.apply(grad_msg(0, 0, 0.4));
    } else {
      ps.apply(grad_msg(0, 0, 0.4));
      ps.apply(grad_msg(1, 0, 0.8));
    }
    return ps.parameters().at("w")(0, 0);
  };
  CHECK(run(false) == run(true));
}

TEST_CASE("async ps behaves exactly like sequential single-worker updates") {
  ParamServerState ps(single_param(1.0), {OptimizerKind::kSgd, 0.1}, DistMode::kAsync, 1);
  auto oracle = single_param(1.0);
  for (int step = 0; step < 5; ++step) {
    const double g = 0.1 * (step + 1);
    const PsApplyResult result = ps.apply(grad_msg(0, ps.global_step(), g));
    CHECK(result.status == PsApplyResult::Status::kApplied);
    sgd_update(oracle, {{"w", Tensor(1, 1, g)}}, 0.1);
    CHECK(ps.parameters().at("w") == oracle.at("w"));
  }
  CHECK(ps.global_step() == 5);
}

TEST_CASE("sync rejects stale gradients; the worker must re-pull") {
  ParamServerState ps(single_param(1.0), {OptimizerKind::kSgd, 0.1}, DistMode::kSync, 1);
  ps.apply(grad_msg(0, 0, 0.5));  // applies, step -> 1
  const PsApplyResult stale = ps.apply(grad_msg(0, 0, 0.5));
  CHECK(stale.status == PsApplyResult::Status::kStale);
  CHECK(ps.global_step() == 1);  // unchanged

  CHECK_THROWS_AS(ps.apply(grad_msg(0, 7, 0.5)), InternalError);  // future step
}

TEST_CASE("duplicate gradients from one worker in a round are rejected") {
  ParamServerState ps(single_param(1.0), {OptimizerKind::kSgd, 0.1}, DistMode::kSync, 2);
  ps.apply(grad_msg(0, 0, 0.4));
  CHECK_THROWS_AS(ps.apply(grad_msg(0, 0, 0.4)), StateError);
}

TEST_CASE("gradient shape and name mismatches are shape errors") {
  ParamServerState ps(single_param(1.0), {OptimizerKind::kSgd, 0.1}, DistMode::kAsync, 1);
  GradientMessage wrong_shape{0, 0, {{"w", Tensor(2, 2, 0.0)}}};
  CHECK_THROWS_AS(ps.apply(wrong_shape), ShapeError);
  GradientMessage wrong_name{0, 0, {{"v", Tensor(1, 1, 0.0)}}};
  CHECK_THROWS_AS(ps.apply(wrong_name), ShapeError);
  GradientMessage missing{0, 0, {}};
  CHECK_THROWS_AS(ps.apply(missing), ShapeError);
}

TEST_CASE("worker_step: zero weights and zero targets give zero gradients") {
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  const Batch batch{Tensor(4, 1, 0.0), std::vector<double>(4, 0.0), 0, 0};
  RngState rng(0);
  const ParamBroadcast snapshot{0, e.parameters().tensors()};
  const GradientMessage msg = worker_step(0, e.model_fn(), batch, snapshot, rng);
  CHECK(msg.basis_step == 0);
  for (const auto& [name, grad] : msg.gradients) {
    CHECK(grad == Tensor(grad.rows(), grad.cols(), 0.0));
  }
}

TEST_CASE("a single worker's gradients equal the local training gradients") {
  const Dataset ds = toy_regression(16, 5);
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);

  // Oracle: run the model function directly on the same parameters.
  ParameterStore oracle_store;
  oracle_store.assign(e.parameters().tensors());
  RngState oracle_rng(1);
  const ModelFnOutput oracle =
      e.model_fn()(ds.features, ds.targets, Mode::kTrain, oracle_store, oracle_rng);

  RngState rng(1);
  const Batch batch{ds.features, ds.targets, 0, 0};
  const GradientMessage msg =
      worker_step(0, e.model_fn(), batch, {0, e.parameters().tensors()}, rng);
  CHECK(msg.gradients == oracle.train_op->gradients);
}

TEST_CASE("two half-shard gradients average to the full-batch gradient") {
  const Dataset ds = toy_regression(32, 6);
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  const ParamBroadcast snapshot{0, e.parameters().tensors()};
  RngState rng(1);

  const Dataset left = first_half(ds);
  const Dataset right = second_half(ds);
  const GradientMessage g0 =
      worker_step(0, e.model_fn(), {left.features, left.targets, 0, 0}, snapshot, rng);
  const GradientMessage g1 =
      worker_step(1, e.model_fn(), {right.features, right.targets, 0, 0}, snapshot, rng);
  const GradientMessage full =
      worker_step(2, e.model_fn(), {ds.features, ds.targets, 0, 0}, snapshot, rng);

  for (const auto& [name, grad] : full.gradients) {
    const Tensor mean = scale(add(g0.gradients.at(name), g1.gradients.at(name)), 0.5);
    CHECK(max_abs_diff(mean, grad) <= 1e-12);
  }
}

TEST_CASE("non-finite gradients surface as worker errors") {
  const Dataset ds = toy_regression(8, 7);
  std::vector<double> bad_targets(ds.n(), std::nan(""));
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  RngState rng(1);
  CHECK_THROWS_AS(worker_step(0, e.model_fn(),
                              {ds.features, bad_targets, 0, 0},
                              {0, e.parameters().tensors()}, rng),
                  TrainingError);
}

TEST_CASE("sync training with two workers reproduces single-worker training") {
  const Dataset ds = toy_regression(32, 11);
  const std::int64_t steps = 40;

  Estimator oracle = Estimator::linear_regressor(columns_1d(), {}, 3);
  oracle.fit(ds.features, ds.targets, steps);

  Estimator distributed = Estimator::linear_regressor(columns_1d(), {}, 3);
  InProcessTransport transport;
  const TrainingReport report = run_distributed_training(
      make_cluster(2), distributed, {first_half(ds), second_half(ds)}, steps,
      DistMode::kSync, transport);

  CHECK(report.ok);
  CHECK(report.mode == "sync");
  CHECK(report.final_global_step == steps);
  CHECK(report.applied_updates == steps);
  CHECK(report.per_worker_steps.at(0) == steps);
  CHECK(report.per_worker_steps.at(1) == steps);
  for (const auto& [name, tensor] : oracle.parameters().tensors()) {
    CHECK(max_abs_diff(tensor, distributed.parameters().get(name)) <= 1e-12);
  }
}

TEST_CASE("sync training gives identical results over the TCP transport") {
  const Dataset ds = toy_regression(32, 11);
  const std::int64_t steps = 15;

  auto run = [&](Transport& transport, const ClusterConfig& cluster) {
    Estimator e = Estimator::linear_regressor(columns_1d(), {}, 3);
    const TrainingReport report = run_distributed_training(
        cluster, e, {first_half(ds), second_half(ds)}, steps, DistMode::kSync,
        transport);
    REQUIRE(report.ok);
    return e.parameters().tensors();
  };

  InProcessTransport in_proc;
  const auto a = run(in_proc, make_cluster(2));

  ClusterConfig tcp_cluster = make_cluster(2);
  for (auto& task : tcp_cluster.tasks) task.address = "127.0.0.1:0";
  tcp_cluster.tasks[0].address = "127.0.0.1:1";  // addresses must be unique
  tcp_cluster.tasks[1].address = "127.0.0.1:2";
  tcp_cluster.tasks[2].address = "127.0.0.1:3";
  tcp_cluster.tasks[3].address = "127.0.0.1:0";  // the ps binds an ephemeral port
  TcpTransport tcp;
  const auto b = run(tcp, tcp_cluster);
  CHECK(a == b);
}

TEST_CASE("async accounting: two workers, fifty steps each") {
  const Dataset ds = toy_regression(32, 13);
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 3);
  InProcessTransport transport;
  const TrainingReport report = run_distributed_training(
      make_cluster(2), e, {first_half(ds), second_half(ds)}, 100, DistMode::kAsync,
      transport);
  CHECK(report.ok);
  CHECK(report.mode == "async");
  CHECK(report.final_global_step == 100);
  CHECK(report.applied_updates == 100);
  CHECK(report.per_worker_steps.at(0) == 50);
  CHECK(report.per_worker_steps.at(1) == 50);
  CHECK(e.global_step() == 100);
}

TEST_CASE("async with one worker matches local training bit for bit") {
  const Dataset ds = toy_regression(16, 17);
  Estimator local = Estimator::linear_regressor(columns_1d(), {}, 5);
  local.fit(ds.features, ds.targets, 25);

  Estimator remote = Estimator::linear_regressor(columns_1d(), {}, 5);
  InProcessTransport transport;
  const TrainingReport report = run_distributed_training(
      make_cluster(1), remote, {ds}, 25, DistMode::kAsync, transport);
  CHECK(report.ok);
  CHECK(remote.parameters().tensors() == local.parameters().tensors());
}

TEST_CASE("a master-only cluster falls back to local training") {
  const Dataset ds = toy_regression(16, 19);
  Estimator reference = Estimator::linear_regressor(columns_1d(), {}, 5);
  reference.fit(ds.features, ds.targets, 30);

  ClusterConfig master_only;
  master_only.tasks = {{TaskRole::kMaster, 0, "master:0"}};
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 5);
  InProcessTransport transport;
  const TrainingReport report =
      run_distributed_training(master_only, e, {ds}, 30, DistMode::kSync, transport);
  CHECK(report.ok);
  CHECK(report.mode == "local");
  CHECK(report.applied_updates == 30);
  CHECK(e.parameters().tensors() == reference.parameters().tensors());
}

TEST_CASE("a failed worker turns into a diagnosable report, not a deadlock") {
  const Dataset good = toy_regression(8, 23);
  Dataset poisoned = toy_regression(8, 23);
  poisoned.targets.assign(poisoned.n(), std::nan(""));

  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 5);
  InProcessTransport transport;
  DistributedOptions options;
  options.sync_patience = std::chrono::milliseconds(100);
  const TrainingReport report = run_distributed_training(
      make_cluster(2), e, {good, poisoned}, 10, DistMode::kSync, transport, options);
  CHECK(!report.ok);
  CHECK(!report.error_code.empty());
  CHECK(report.final_global_step < 10);
}

TEST_CASE("shard/worker count mismatches are rejected") {
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 5);
  InProcessTransport transport;
  const Dataset ds = toy_regression(8, 29);
  CHECK_THROWS_AS(run_distributed_training(make_cluster(2), e, {ds}, 10,
                                           DistMode::kSync, transport),
                  ValidationError);
}

TEST_CASE("in-process transport refuses unknown addresses") {
  InProcessTransport transport;
  CHECK_THROWS_AS(transport.connect("nowhere:1"), TransportError);
  auto listener = transport.listen("ps:0");
  CHECK(listener->address() == "ps:0");
  CHECK_THROWS_AS(transport.listen("ps:0"), TransportError);
}

TEST_CASE("tcp listeners report their bound ephemeral port") {
  TcpTransport transport;
  auto listener = transport.listen("127.0.0.1:0");
  CHECK(listener->address() != "127.0.0.1:0");
  CHECK(listener->address().rfind("127.0.0.1:", 0) == 0);

  auto client = transport.connect(listener->address());
  auto server = listener->accept();
  client->send(ControlMessage{ControlKind::kPullRequest, "hi"});
  const auto received = server->recv();
  REQUIRE(received.has_value());
  CHECK(std::get<ControlMessage>(*received).detail == "hi");
  client->close();
  CHECK(!server->recv().has_value());
}
