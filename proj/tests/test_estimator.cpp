#include <doctest.h>

#include <cmath>

#include "tfln/dataset.hpp"
#include "tfln/error.hpp"
#include "tfln/estimator.hpp"
#include "tfln/iris_data.hpp"
#include "testutil.hpp"

using namespace tfln;
using testutil::TempDir;

namespace {

std::vector<FeatureColumn> columns_1d() {
  return {{"feature_0", FeatureColumn::Kind::kRealValued, 1}};
}

Dataset iris() { return parse_iris_csv(embedded_iris_csv()); }

}  // namespace

TEST_CASE("dnn_classifier builds the chained parameter shapes") {
  const Dataset ds = iris();
  Estimator e = Estimator::dnn_classifier(infer_real_valued_columns(ds.features),
                                          {10, 20, 10}, 3, {}, 42);
  const auto& params = e.parameters().tensors();
  REQUIRE(params.size() == 8);
  CHECK(params.at("dense_0/weights").shape_str() == "4x10");
  CHECK(params.at("dense_1/weights").shape_str() == "10x20");
  CHECK(params.at("dense_2/weights").shape_str() == "20x10");
  CHECK(params.at("logits/weights").shape_str() == "10x3");
  CHECK(params.at("dense_0/bias").shape_str() == "1x10");
  CHECK(params.at("logits/bias").shape_str() == "1x3");
}

TEST_CASE("dnn_classifier rejects degenerate configurations") {
  const auto columns = columns_1d();
  CHECK_THROWS_AS(Estimator::dnn_classifier(columns, {10}, 1, {}, 0), ValidationError);
  CHECK_THROWS_AS(Estimator::dnn_classifier(columns, {}, 3, {}, 0), ValidationError);
}

TEST_CASE("identical seeds build identical initial parameters") {
  const auto columns = infer_real_valued_columns(iris().features);
  Estimator a = Estimator::dnn_classifier(columns, {10, 20, 10}, 3, {}, 42);
  Estimator b = Estimator::dnn_classifier(columns, {10, 20, 10}, 3, {}, 42);
  Estimator c = Estimator::dnn_classifier(columns, {10, 20, 10}, 3, {}, 43);
  CHECK(a.parameters().tensors() == b.parameters().tensors());
  CHECK(a.parameters().tensors() != c.parameters().tensors());
}

TEST_CASE("fit advances global_step by exactly the executed steps") {
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  const Tensor x = Tensor::from_rows({{1.0}, {2.0}});
  const std::vector<double> y{1.0, 2.0};
  const FitReport report = e.fit(x, y, 1);
  CHECK(report.steps_executed == 1);
  CHECK(e.global_step() == 1);
  e.fit(x, y, 4);
  CHECK(e.global_step() == 5);
}

TEST_CASE("fit(k) then fit(m) equals fit(k+m) bit for bit") {
  const Dataset ds = iris();
  auto [train, test] = train_test_split(ds, 0.2, 42);
  const auto columns = infer_real_valued_columns(ds.features);

  Estimator split_run = Estimator::dnn_classifier(columns, {10, 20, 10}, 3, {}, 42);
  split_run.fit(train.features, train.targets, 30);
  split_run.fit(train.features, train.targets, 30);

  Estimator joint_run = Estimator::dnn_classifier(columns, {10, 20, 10}, 3, {}, 42);
  joint_run.fit(train.features, train.targets, 60);

  CHECK(split_run.global_step() == 60);
  CHECK(split_run.parameters().tensors() == joint_run.parameters().tensors());
}

TEST_CASE("classifier predictions satisfy the prob/class contract") {
  const Dataset ds = iris();
  auto [train, test] = train_test_split(ds, 0.2, 42);
  Estimator e = Estimator::dnn_classifier(infer_real_valued_columns(ds.features),
                                          {10, 20, 10}, 3, {}, 42);
  e.fit(train.features, train.targets, 20);
  const auto predictions = e.predict(test.features);
  const Tensor& prob = predictions.at("prob");
  const Tensor& cls = predictions.at("class");
  REQUIRE(prob.rows() == test.n());
  const std::vector<std::int64_t> expected = argmax_rows(prob);
  for (std::size_t i = 0; i < prob.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < prob.cols(); ++j) sum += prob(i, j);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(static_cast<std::int64_t>(cls(i, 0)) == expected[i]);
  }
}

TEST_CASE("predict is pure: repeated calls, untouched parameters") {
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  e.fit(Tensor::from_rows({{1.0}}), {2.0}, 3);
  const auto params_before = e.parameters().tensors();
  const std::int64_t step_before = e.global_step();
  const auto first = e.predict(Tensor::from_rows({{5.0}}));
  const auto second = e.predict(Tensor::from_rows({{5.0}}));
  CHECK(first == second);
  CHECK(e.parameters().tensors() == params_before);
  CHECK(e.global_step() == step_before);
}

TEST_CASE("predicting with an unfitted custom estimator is a state error") {
  Estimator e(testutil::custom_dropout_model_fn(), {}, 7);
  CHECK_THROWS_AS(e.predict(Tensor(1, 4, 0.0)), StateError);
  CHECK_THROWS_AS(e.evaluate(Tensor(1, 4, 0.0), {0.0}, {Metric::kAccuracy}), StateError);
}

TEST_CASE("the iterable prediction stream matches batch predict row by row") {
  const Dataset ds = iris();
  auto [train, test] = train_test_split(ds, 0.2, 42);
  Estimator e = Estimator::dnn_classifier(infer_real_valued_columns(ds.features),
                                          {10, 20, 10}, 3, {}, 42);
  e.fit(train.features, train.targets, 10);

  const auto whole = e.predict(test.features);
  PredictionStream stream = e.predict_iterable(test.features);
  std::size_t rows = 0;
  while (auto row = stream.next()) {
    for (const auto& [name, tensor] : *row) {
      REQUIRE(tensor.rows() == 1);
      for (std::size_t j = 0; j < tensor.cols(); ++j) {
        CHECK(tensor(0, j) == whole.at(name)(rows, j));
      }
    }
    ++rows;
  }
  CHECK(rows == test.n());
}

TEST_CASE("evaluate: perfect predictions score accuracy 1") {
  const Dataset ds = iris();
  auto [train, test] = train_test_split(ds, 0.2, 42);
  Estimator e = Estimator::dnn_classifier(infer_real_valued_columns(ds.features),
                                          {10, 20, 10}, 3, {}, 42);
  e.fit(train.features, train.targets, 200);
  const auto train_metrics =
      e.evaluate(train.features, train.targets, {Metric::kAccuracy});
  CHECK(train_metrics.at("accuracy") >= 0.95);  // sanity on the fitted model

  // Evaluating rows against the model's own predicted classes is accuracy 1.
  const auto predictions = e.predict(test.features);
  std::vector<double> self_labels;
  for (std::size_t i = 0; i < test.n(); ++i) {
    self_labels.push_back(predictions.at("class")(i, 0));
  }
  const auto metrics = e.evaluate(test.features, self_labels, {Metric::kAccuracy});
  CHECK(metrics.at("accuracy") == 1.0);
}

TEST_CASE("evaluate: uniform probabilities cost ln 3 of log loss") {
  // A zero-initialized linear classifier emits uniform probabilities.
  Estimator e = Estimator::linear_classifier(columns_1d(), 3, {}, 0);
  const Tensor x = Tensor::from_rows({{1.0}, {2.0}, {3.0}});
  const auto metrics = e.evaluate(x, {0.0, 1.0, 2.0}, {Metric::kLogLoss});
  CHECK(metrics.at("log_loss") == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("evaluate: a constant predictor at the target mean scores the variance") {
  // Zero-initialized regressor predicts 0; targets with mean 0 make the mse
  // equal their variance: (1+1+4+4)/4 = 2.5.
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  const Tensor x(4, 1, 0.0);
  const auto metrics = e.evaluate(x, {1.0, -1.0, 2.0, -2.0}, {Metric::kMse});
  CHECK(metrics.at("mse") == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("inapplicable metrics are validation errors") {
  Estimator regressor = Estimator::linear_regressor(columns_1d(), {}, 0);
  CHECK_THROWS_AS(
      regressor.evaluate(Tensor(1, 1, 0.0), {0.0}, {Metric::kAccuracy}),
      ValidationError);
  Estimator classifier = Estimator::linear_classifier(columns_1d(), 3, {}, 0);
  CHECK_THROWS_AS(classifier.evaluate(Tensor(1, 1, 0.0), {0.0}, {Metric::kMse}),
                  ValidationError);
}

TEST_CASE("schema mismatches fail before any step runs") {
  Estimator e = Estimator::dnn_classifier(infer_real_valued_columns(iris().features),
                                          {10}, 3, {}, 0);
  CHECK_THROWS_AS(e.fit(Tensor(5, 3, 0.0), std::vector<double>(5, 0.0), 10),
                  ValidationError);
  CHECK(e.global_step() == 0);
  CHECK_THROWS_AS(e.predict(Tensor(1, 7, 0.0)), ValidationError);
}

TEST_CASE("a non-finite loss aborts training naming the step") {
  ModelFn bad_fn = [](const Tensor& features, const std::vector<double>&, Mode,
                      ParameterStore& store, RngState&) -> ModelFnOutput {
    store.get_or_create("w", 1, 1, Mode::kTrain, [] { return Tensor(1, 1, 0.0); });
    ModelFnOutput out;
    out.predictions["score"] = Tensor(features.rows(), 1, 0.0);
    out.loss = std::numeric_limits<double>::infinity();
    out.train_op = TrainOp{{OptimizerKind::kSgd, 0.1}, {{"w", Tensor(1, 1, 0.0)}}};
    return out;
  };
  Estimator e(bad_fn, {}, 0);
  try {
    e.fit(Tensor(1, 1, 0.0), {0.0}, 5);
    FAIL("expected TrainingError");
  } catch (const TrainingError& err) {
    CHECK(std::string(err.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("linear regressor learns y = 2x + 1") {
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  RngState rng(3);
  Tensor x(64, 1);
  std::vector<double> y(64);
  for (std::size_t i = 0; i < 64; ++i) {
    x(i, 0) = rng.uniform(0.0, 1.0);
    y[i] = 2.0 * x(i, 0) + 1.0;
  }
  e.fit(x, y, 500);
  CHECK(e.parameters().get("linear/weights")(0, 0) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(e.parameters().get("linear/bias")(0, 0) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("logistic regression separates a separable toy set") {
  Estimator e = Estimator::logistic_regressor(columns_1d(), {}, 0);
  Tensor x(20, 1);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    const bool positive = i % 2 == 0;
    x(i, 0) = positive ? 1.0 + 0.05 * static_cast<double>(i) : -1.0 - 0.05 * static_cast<double>(i);
    y[i] = positive ? 1.0 : 0.0;
  }
  e.fit(x, y, 500);
  CHECK(e.evaluate(x, y, {Metric::kAccuracy}).at("accuracy") == 1.0);
}

TEST_CASE("a zero-initialized regressor predicts zero before fitting") {
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  const auto predictions = e.predict(Tensor::from_rows({{12.5}, {-3.0}}));
  CHECK(predictions.at("score") == Tensor(2, 1, 0.0));
}

TEST_CASE("save / restore round-trips parameters and predictions bitwise") {
  TempDir dir("est-ckpt");
  const Dataset ds = iris();
  auto [train, test] = train_test_split(ds, 0.2, 42);
  Estimator e = Estimator::dnn_classifier(infer_real_valued_columns(ds.features),
                                          {10, 20, 10}, 3, {}, 42);
  e.fit(train.features, train.targets, 25);
  const auto before = e.predict(test.features);

  const auto path = dir.path() / checkpoint_file_name(e.global_step());
  e.save_checkpoint(path);

  Estimator restored = Estimator::dnn_classifier(infer_real_valued_columns(ds.features),
                                                 {10, 20, 10}, 3, {}, 1);
  restored.restore_checkpoint(path);
  CHECK(restored.global_step() == 25);
  CHECK(restored.predict(test.features) == before);
}

TEST_CASE("restoring into a mismatched architecture lists the offenders") {
  TempDir dir("mismatch");
  Estimator small = Estimator::dnn_classifier(columns_1d(), {5}, 3, {}, 0);
  const auto path = dir.path() / "ckpt-0";
  small.save_checkpoint(path);

  Estimator large = Estimator::dnn_classifier(columns_1d(), {5, 7}, 3, {}, 0);
  try {
    large.restore_checkpoint(path);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("dense_1/weights") != std::string::npos);
  }
}

TEST_CASE("the custom dropout model function runs through the generic estimator") {
  const Dataset ds = iris();
  auto [train, test] = train_test_split(ds, 0.2, 42);
  Estimator e(testutil::custom_dropout_model_fn(), {}, 42);
  const FitReport report = e.fit(train.features, train.targets, 50);
  CHECK(report.global_step == 50);
  CHECK(std::isfinite(report.final_loss));

  const auto predictions = e.predict(test.features);
  REQUIRE(predictions.contains("class"));
  REQUIRE(predictions.contains("prob"));
  const Tensor& prob = predictions.at("prob");
  const std::vector<std::int64_t> ref = argmax_rows(prob);
  for (std::size_t i = 0; i < prob.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < prob.cols(); ++j) sum += prob(i, j);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(static_cast<std::int64_t>(predictions.at("class")(i, 0)) == ref[i]);
  }
}

TEST_CASE("dropout training is deterministic per seed but varies across seeds") {
  const Dataset ds = iris();
  auto [train, test] = train_test_split(ds, 0.2, 42);
  auto run = [&](std::uint64_t seed) {
    Estimator e(testutil::custom_dropout_model_fn(), {}, seed);
    e.fit(train.features, train.targets, 10);
    return e.parameters().tensors();
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}

TEST_CASE("streamed fit consumes batches from a source") {
  Dataset ds;
  ds.features = Tensor::from_rows({{0.0}, {1.0}, {2.0}, {3.0}});
  ds.targets = {1.0, 3.0, 5.0, 7.0};
  DatasetBatchIterator stream(ds, 2, true, 9);
  Estimator e = Estimator::linear_regressor(columns_1d(), {}, 0);
  const FitReport report = e.fit(stream, 40);
  CHECK(report.steps_executed == 40);
  CHECK(e.parameters().get("linear/weights")(0, 0) > 0.5);
}
