#include <doctest.h>

#include <filesystem>

#include "tfln/dataset.hpp"
#include "tfln/error.hpp"
#include "tfln/estimator.hpp"
#include "tfln/hooks.hpp"
#include "testutil.hpp"

using namespace tfln;
using testutil::TempDir;

namespace {

struct RecordingHook : SessionHook {
  std::vector<HookEvent> events;
  std::string tag;
  std::vector<std::string>* shared_log = nullptr;

  void on_event(const HookEvent& event, RunContext& ctx) override {
    (void)ctx;
    events.push_back(event);
    if (shared_log) shared_log->push_back(tag);
  }
};

/// Tiny regression problem for hook integration tests.
Estimator tiny_regressor() {
  std::vector<FeatureColumn> columns{{"feature_0", FeatureColumn::Kind::kRealValued, 1}};
  return Estimator::linear_regressor(columns, {}, 0);
}

const Tensor kX = Tensor::from_rows({{0.0}, {1.0}, {2.0}, {3.0}});
const std::vector<double> kY = {1.0, 3.0, 5.0, 7.0};

}  // namespace

TEST_CASE("a 2-step session produces the full lifecycle event sequence") {
  RecordingHook hook;
  Estimator e = tiny_regressor();
  e.fit(kX, kY, 2, {&hook});
  const std::vector<HookEventKind> kinds = {
      HookEventKind::kSessionStart, HookEventKind::kBeforeRun,
      HookEventKind::kAfterRun,     HookEventKind::kBeforeRun,
      HookEventKind::kAfterRun,     HookEventKind::kSessionEnd};
  REQUIRE(hook.events.size() == kinds.size());
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    CHECK(hook.events[i].kind == kinds[i]);
  }
  // Loss rides only on after_run.
  for (const HookEvent& event : hook.events) {
    CHECK(event.loss.has_value() == (event.kind == HookEventKind::kAfterRun));
  }
}

TEST_CASE("training with zero hooks is fine") {
  Estimator e = tiny_regressor();
  CHECK(e.fit(kX, kY, 3).steps_executed == 3);
}

TEST_CASE("hooks fire in registration order within each event") {
  std::vector<std::string> log;
  RecordingHook a;
  a.tag = "A";
  a.shared_log = &log;
  RecordingHook b;
  b.tag = "B";
  b.shared_log = &log;
  Estimator e = tiny_regressor();
  e.fit(kX, kY, 2, {&a, &b});
  REQUIRE(log.size() % 2 == 0);
  for (std::size_t i = 0; i < log.size(); i += 2) {
    CHECK(log[i] == "A");
    CHECK(log[i + 1] == "B");
  }
}

TEST_CASE("the dispatcher rejects out-of-order events") {
  HookDispatcher d({});
  RunContext ctx;
  CHECK_THROWS_AS(d.dispatch({HookEventKind::kAfterRun, 0, 0.0}, ctx), InternalError);

  HookDispatcher d2({});
  d2.dispatch({HookEventKind::kSessionStart, 0, std::nullopt}, ctx);
  CHECK_THROWS_AS(d2.dispatch({HookEventKind::kSessionStart, 0, std::nullopt}, ctx),
                  InternalError);
  d2.dispatch({HookEventKind::kBeforeRun, 0, std::nullopt}, ctx);
  CHECK_THROWS_AS(d2.dispatch({HookEventKind::kSessionEnd, 0, std::nullopt}, ctx),
                  InternalError);
}

TEST_CASE("StopAtStepHook halts at the requested step") {
  Estimator e = tiny_regressor();
  StopAtStepHook stop(5);
  const FitReport report = e.fit(kX, kY, 200, {&stop});
  CHECK(report.global_step == 5);
  CHECK(report.stopped_early);
  CHECK(e.global_step() == 5);
}

TEST_CASE("StopAtStepHook beyond the run never fires; at 1 it allows one step") {
  Estimator e = tiny_regressor();
  StopAtStepHook far(100);
  CHECK(e.fit(kX, kY, 3, {&far}).global_step == 3);

  Estimator e2 = tiny_regressor();
  StopAtStepHook one(1);
  CHECK(e2.fit(kX, kY, 200, {&one}).global_step == 1);
}

TEST_CASE("stop latency: no step begins after stop is requested") {
  RecordingHook recorder;
  StopAtStepHook stop(2);
  Estimator e = tiny_regressor();
  e.fit(kX, kY, 50, {&stop, &recorder});
  for (const HookEvent& event : recorder.events) {
    if (event.kind == HookEventKind::kBeforeRun) {
      CHECK(event.global_step < 2);
    }
  }
}

TEST_CASE("CheckpointSaverHook writes on cadence plus the final step") {
  TempDir dir("saver");
  Estimator e = tiny_regressor();
  CheckpointSaverHook saver(2, dir.path());
  e.fit(kX, kY, 5, {&saver});
  CHECK(std::filesystem::exists(dir.path() / "ckpt-2"));
  CHECK(std::filesystem::exists(dir.path() / "ckpt-4"));
  CHECK(std::filesystem::exists(dir.path() / "ckpt-5"));
  CHECK(!std::filesystem::exists(dir.path() / "ckpt-1"));
  CHECK(!std::filesystem::exists(dir.path() / "ckpt-3"));

  // Any saved checkpoint restores its parameters bit-exactly.
  Checkpoint ckpt = checkpoint_restore(dir.path() / "ckpt-5");
  CHECK(ckpt.global_step == 5);
  CHECK(ckpt.tensors == e.parameters().tensors());
}

TEST_CASE("checkpoints written across a resumed fit continue the step numbering") {
  TempDir dir("saver-resume");
  Estimator e = tiny_regressor();
  CheckpointSaverHook saver(2, dir.path());
  e.fit(kX, kY, 3, {&saver});  // ckpt-2, ckpt-3
  e.fit(kX, kY, 2, {&saver});  // resumes at step 3: ckpt-4, ckpt-5
  CHECK(e.global_step() == 5);
  for (int step : {2, 3, 4, 5}) {
    CHECK(std::filesystem::exists(dir.path() / ("ckpt-" + std::to_string(step))));
  }
  CHECK(checkpoint_restore(dir.path() / "ckpt-5").global_step == 5);
}

TEST_CASE("a long cadence still produces the final checkpoint") {
  TempDir dir("saver-final");
  Estimator e = tiny_regressor();
  CheckpointSaverHook saver(10, dir.path());
  e.fit(kX, kY, 5, {&saver});
  CHECK(std::filesystem::exists(dir.path() / "ckpt-5"));
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
    (void)entry;
    ++count;
  }
  CHECK(count == 1);
}

TEST_CASE("logging hook emits step/loss lines at the cadence and the end") {
  std::vector<std::string> lines;
  const LineSink sink = [&](const std::string& line) { lines.push_back(line); };

  Estimator e = tiny_regressor();
  LoggingHook every1(1, sink);
  e.fit(kX, kY, 3, {&every1});
  CHECK(lines.size() == 3);
  CHECK(lines[0].rfind("step=1 loss=", 0) == 0);

  lines.clear();
  Estimator e2 = tiny_regressor();
  LoggingHook every2(2, sink);
  e2.fit(kX, kY, 3, {&every2});
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].rfind("step=2 loss=", 0) == 0);
  CHECK(lines[1].rfind("step=3 loss=", 0) == 0);
}

TEST_CASE("metric values format with six significant digits") {
  CHECK(format_metric_value(1.0 / 3.0) == "0.333333");
  CHECK(format_metric_value(1.0) == "1");
  CHECK(format_metric_value(1.09861228866811) == "1.09861");
}

TEST_CASE("a do-nothing hook never changes training results") {
  Estimator with_hook = tiny_regressor();
  RecordingHook hook;
  with_hook.fit(kX, kY, 20, {&hook});

  Estimator without_hook = tiny_regressor();
  without_hook.fit(kX, kY, 20);

  CHECK(with_hook.parameters().tensors() == without_hook.parameters().tensors());
}
