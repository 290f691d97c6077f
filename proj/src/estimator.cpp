#include "tfln/estimator.hpp"

#include <cmath>
#include <sstream>

#include "tfln/error.hpp"
#include "tfln/losses.hpp"

namespace tfln {

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw StateError("parameter '" + name + "' does not exist; fit the estimator or restore a checkpoint first");
  }
  return it->second;
}

void ParameterStore::put(const std::string& name, Tensor tensor) {
  if (!tensors_.emplace(name, std::move(tensor)).second) {
    throw ValidationError("parameter '" + name + "' already exists");
  }
}

Tensor& ParameterStore::get_or_create(const std::string& name, std::size_t rows,
                                      std::size_t cols, Mode mode,
                                      const std::function<Tensor()>& init) {
  auto it = tensors_.find(name);
  if (it != tensors_.end()) {
    if (it->second.rows() != rows || it->second.cols() != cols) {
      throw ShapeError("parameter '" + name + "' has shape " + it->second.shape_str() +
                       ", model expects " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
    return it->second;
  }
  if (mode != Mode::kTrain) {
    throw StateError("parameter '" + name + "' does not exist; fit the estimator or restore a checkpoint first");
  }
  Tensor created = init();
  if (created.rows() != rows || created.cols() != cols) {
    throw InternalError("initializer for '" + name + "' produced " + created.shape_str() +
                        ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  return tensors_.emplace(name, std::move(created)).first->second;
}

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::kAccuracy: return "accuracy";
    case Metric::kMse: return "mse";
    case Metric::kLogLoss: return "log_loss";
  }
  return "?";
}

Metric metric_from_string(const std::string& name) {
  if (name == "accuracy") return Metric::kAccuracy;
  if (name == "mse") return Metric::kMse;
  if (name == "log_loss") return Metric::kLogLoss;
  throw ValidationError("unknown metric '" + name + "'");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kCustom: return "custom";
    case ModelKind::kDnnClassifier: return "dnn_classifier";
    case ModelKind::kLinearRegressor: return "linear_regressor";
    case ModelKind::kLinearClassifier: return "linear_classifier";
    case ModelKind::kLogisticRegressor: return "logistic_regressor";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "custom") return ModelKind::kCustom;
  if (name == "dnn_classifier") return ModelKind::kDnnClassifier;
  if (name == "linear_regressor") return ModelKind::kLinearRegressor;
  if (name == "linear_classifier") return ModelKind::kLinearClassifier;
  if (name == "logistic_regressor") return ModelKind::kLogisticRegressor;
  throw ValidationError("unknown model kind '" + name + "'");
}

std::size_t schema_width(const std::vector<FeatureColumn>& columns) {
  std::size_t width = 0;
  for (const FeatureColumn& column : columns) width += column.dimension;
  return width;
}

DenseLayerParams dense_layer_params(ParameterStore& store, const std::string& prefix,
                                    std::size_t in_dim, std::size_t out_dim, Mode mode,
                                    const std::function<DenseLayerParams()>& init) {
  // Initialize both tensors together so weight/bias creation is atomic.
  std::optional<DenseLayerParams> created;
  auto lazy = [&]() -> const DenseLayerParams& {
    if (!created) created = init();
    return *created;
  };
  Tensor weights = store.get_or_create(prefix + "/weights", in_dim, out_dim, mode,
                                       [&] { return lazy().weights; });
  Tensor bias = store.get_or_create(prefix + "/bias", 1, out_dim, mode,
                                    [&] { return lazy().bias; });
  return {std::move(weights), std::move(bias)};
}

namespace {

Tensor labels_to_tensor(const std::vector<std::int64_t>& labels) {
  Tensor out(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out(i, 0) = static_cast<double>(labels[i]);
  }
  return out;
}

Tensor targets_to_column(const std::vector<double>& targets) {
  Tensor out(targets.size(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) out(i, 0) = targets[i];
  return out;
}

/// Shared tail of every classifier model function: softmax predictions, loss,
/// and gradients through the given stack.
void finish_softmax_classifier(ModelFnOutput& out, const Tensor& logits,
                               std::vector<LayerCache> caches,
                               std::vector<DenseLayerParams> all_params,
                               const std::vector<std::string>& param_prefixes,
                               const std::vector<double>& targets, Mode mode,
                               std::size_t n_classes, OptimizerBinding binding) {
  Tensor prob = softmax_rows(logits);
  out.predictions["class"] = labels_to_tensor(argmax_rows(prob));
  out.predictions["prob"] = std::move(prob);
  if (mode == Mode::kInfer) return;

  const Tensor onehot = one_hot(to_label_vector(targets), n_classes, 1.0, 0.0);
  auto [loss, dlogits] = softmax_cross_entropy(logits, onehot);
  out.loss = loss;
  if (mode != Mode::kTrain) return;

  auto [grads, dinput] = backward_stack(caches, all_params, dlogits);
  TrainOp op;
  op.optimizer = binding;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    op.gradients[param_prefixes[i] + "/weights"] = std::move(grads[i].dweights);
    op.gradients[param_prefixes[i] + "/bias"] = std::move(grads[i].dbias);
  }
  out.train_op = std::move(op);
}

ModelFn make_dnn_classifier_fn(std::vector<std::size_t> dims, std::size_t n_classes) {
  return [dims = std::move(dims), n_classes](
             const Tensor& x, const std::vector<double>& targets, Mode mode,
             ParameterStore& store, RngState& rng) -> ModelFnOutput {
    std::vector<DenseLayerParams> hidden;
    std::vector<std::string> prefixes;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      const std::string prefix = "dense_" + std::to_string(i);
      hidden.push_back(dense_layer_params(
          store, prefix, dims[i], dims[i + 1], mode,
          [&] { return glorot_init(dims[i], dims[i + 1], rng); }));
      prefixes.push_back(prefix);
    }
    DenseLayerParams output_layer = dense_layer_params(
        store, "logits", dims.back(), n_classes, mode,
        [&] { return glorot_init(dims.back(), n_classes, rng); });
    prefixes.push_back("logits");

    auto [h, caches] = stack_fully_connected(x, hidden, 1.0, rng, mode == Mode::kTrain);
    auto [logits, logits_cache] = fully_connected_forward(h, output_layer, Activation::kNone);
    caches.push_back(std::move(logits_cache));
    std::vector<DenseLayerParams> all_params = std::move(hidden);
    all_params.push_back(std::move(output_layer));

    ModelFnOutput out;
    finish_softmax_classifier(out, logits, std::move(caches), std::move(all_params),
                              prefixes, targets, mode, n_classes,
                              {OptimizerKind::kAdagrad, 0.1});
    return out;
  };
}

ModelFn make_linear_classifier_fn(std::size_t in_dim, std::size_t n_classes) {
  return [in_dim, n_classes](const Tensor& x, const std::vector<double>& targets,
                             Mode mode, ParameterStore& store,
                             RngState& rng) -> ModelFnOutput {
    (void)rng;
    DenseLayerParams layer = dense_layer_params(
        store, "linear", in_dim, n_classes, mode,
        [&] { return zero_init(in_dim, n_classes); });
    auto [logits, cache] = fully_connected_forward(x, layer, Activation::kNone);

    ModelFnOutput out;
    finish_softmax_classifier(out, logits, {std::move(cache)}, {std::move(layer)},
                              {"linear"}, targets, mode, n_classes,
                              {OptimizerKind::kSgd, 0.1});
    return out;
  };
}

ModelFn make_linear_regressor_fn(std::size_t in_dim) {
  return [in_dim](const Tensor& x, const std::vector<double>& targets, Mode mode,
                  ParameterStore& store, RngState& rng) -> ModelFnOutput {
    (void)rng;
    DenseLayerParams layer = dense_layer_params(store, "linear", in_dim, 1, mode,
                                                [&] { return zero_init(in_dim, 1); });
    auto [score, cache] = fully_connected_forward(x, layer, Activation::kNone);

    ModelFnOutput out;
    out.predictions["score"] = score;
    if (mode == Mode::kInfer) return out;

    auto [loss, dscore] = mean_squared_error(score, targets_to_column(targets));
    out.loss = loss;
    if (mode != Mode::kTrain) return out;

    auto [grads, dinput] = backward_stack({cache}, {layer}, dscore);
    TrainOp op;
    op.optimizer = {OptimizerKind::kSgd, 0.1};
    op.gradients["linear/weights"] = std::move(grads[0].dweights);
    op.gradients["linear/bias"] = std::move(grads[0].dbias);
    out.train_op = std::move(op);
    return out;
  };
}

ModelFn make_logistic_regressor_fn(std::size_t in_dim) {
  return [in_dim](const Tensor& x, const std::vector<double>& targets, Mode mode,
                  ParameterStore& store, RngState& rng) -> ModelFnOutput {
    (void)rng;
    DenseLayerParams layer = dense_layer_params(store, "logistic", in_dim, 1, mode,
                                                [&] { return zero_init(in_dim, 1); });
    auto [logit, cache] = fully_connected_forward(x, layer, Activation::kNone);

    ModelFnOutput out;
    Tensor prob(logit.rows(), 2);
    for (std::size_t i = 0; i < logit.rows(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-logit(i, 0)));
      prob(i, 0) = 1.0 - p;
      prob(i, 1) = p;
    }
    out.predictions["class"] = labels_to_tensor(argmax_rows(prob));
    out.predictions["prob"] = std::move(prob);
    if (mode == Mode::kInfer) return out;

    auto [loss, dlogit] = sigmoid_cross_entropy(logit, targets_to_column(targets));
    out.loss = loss;
    if (mode != Mode::kTrain) return out;

    auto [grads, dinput] = backward_stack({cache}, {layer}, dlogit);
    TrainOp op;
    op.optimizer = {OptimizerKind::kSgd, 0.1};
    op.gradients["logistic/weights"] = std::move(grads[0].dweights);
    op.gradients["logistic/bias"] = std::move(grads[0].dbias);
    out.train_op = std::move(op);
    return out;
  };
}

}  // namespace

Estimator::Estimator(ModelFn model_fn, RunConfig config, std::uint64_t seed)
    : model_fn_(std::move(model_fn)), config_(std::move(config)), rng_(seed) {
  if (!model_fn_) {
    throw ValidationError("estimator requires a model function");
  }
}

Estimator Estimator::dnn_classifier(const std::vector<FeatureColumn>& feature_columns,
                                    const std::vector<std::size_t>& hidden_units,
                                    std::size_t n_classes, RunConfig config,
                                    std::uint64_t seed) {
  if (n_classes < 2) {
    throw ValidationError("dnn_classifier: n_classes must be >= 2, got " +
                          std::to_string(n_classes));
  }
  if (hidden_units.empty()) {
    throw ValidationError("dnn_classifier: hidden_units must be non-empty");
  }
  const std::size_t width = schema_width(feature_columns);
  if (width == 0) {
    throw ValidationError("dnn_classifier: feature schema has zero width");
  }
  std::vector<std::size_t> dims{width};
  dims.insert(dims.end(), hidden_units.begin(), hidden_units.end());

  Estimator e(make_dnn_classifier_fn(dims, n_classes), std::move(config), seed);
  e.architecture_ = {ModelKind::kDnnClassifier, width, n_classes, hidden_units};
  e.binding_ = OptimizerBinding{OptimizerKind::kAdagrad, 0.1};
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayerParams layer = glorot_init(dims[i], dims[i + 1], e.rng_);
    e.params_.put("dense_" + std::to_string(i) + "/weights", std::move(layer.weights));
    e.params_.put("dense_" + std::to_string(i) + "/bias", std::move(layer.bias));
  }
  DenseLayerParams logits_layer = glorot_init(dims.back(), n_classes, e.rng_);
  e.params_.put("logits/weights", std::move(logits_layer.weights));
  e.params_.put("logits/bias", std::move(logits_layer.bias));
  return e;
}

Estimator Estimator::linear_regressor(const std::vector<FeatureColumn>& feature_columns,
                                      RunConfig config, std::uint64_t seed) {
  const std::size_t width = schema_width(feature_columns);
  if (width == 0) {
    throw ValidationError("linear_regressor: feature schema has zero width");
  }
  Estimator e(make_linear_regressor_fn(width), std::move(config), seed);
  e.architecture_ = {ModelKind::kLinearRegressor, width, std::nullopt, {}};
  e.binding_ = OptimizerBinding{OptimizerKind::kSgd, 0.1};
  DenseLayerParams layer = zero_init(width, 1);
  e.params_.put("linear/weights", std::move(layer.weights));
  e.params_.put("linear/bias", std::move(layer.bias));
  return e;
}

Estimator Estimator::linear_classifier(const std::vector<FeatureColumn>& feature_columns,
                                       std::size_t n_classes, RunConfig config,
                                       std::uint64_t seed) {
  if (n_classes < 2) {
    throw ValidationError("linear_classifier: n_classes must be >= 2, got " +
                          std::to_string(n_classes));
  }
  const std::size_t width = schema_width(feature_columns);
  if (width == 0) {
    throw ValidationError("linear_classifier: feature schema has zero width");
  }
  Estimator e(make_linear_classifier_fn(width, n_classes), std::move(config), seed);
  e.architecture_ = {ModelKind::kLinearClassifier, width, n_classes, {}};
  e.binding_ = OptimizerBinding{OptimizerKind::kSgd, 0.1};
  DenseLayerParams layer = zero_init(width, n_classes);
  e.params_.put("linear/weights", std::move(layer.weights));
  e.params_.put("linear/bias", std::move(layer.bias));
  return e;
}

Estimator Estimator::logistic_regressor(const std::vector<FeatureColumn>& feature_columns,
                                        RunConfig config, std::uint64_t seed) {
  const std::size_t width = schema_width(feature_columns);
  if (width == 0) {
    throw ValidationError("logistic_regressor: feature schema has zero width");
  }
  Estimator e(make_logistic_regressor_fn(width), std::move(config), seed);
  e.architecture_ = {ModelKind::kLogisticRegressor, width, 2, {}};
  e.binding_ = OptimizerBinding{OptimizerKind::kSgd, 0.1};
  DenseLayerParams layer = zero_init(width, 1);
  e.params_.put("logistic/weights", std::move(layer.weights));
  e.params_.put("logistic/bias", std::move(layer.bias));
  return e;
}

void Estimator::validate_input_width(const Tensor& x) const {
  if (architecture_.n_features != 0 && x.cols() != architecture_.n_features) {
    throw ValidationError("input has " + std::to_string(x.cols()) +
                          " feature columns; model expects " +
                          std::to_string(architecture_.n_features));
  }
}

FitReport Estimator::fit(const Tensor& x, const std::vector<double>& y,
                         std::int64_t steps, const std::vector<SessionHook*>& hooks) {
  if (x.rows() != y.size()) {
    throw ValidationError("fit: " + std::to_string(x.rows()) + " feature rows vs " +
                          std::to_string(y.size()) + " targets");
  }
  validate_input_width(x);
  FullBatchSource source(x, y);
  return run_training_loop(source, steps, hooks);
}

FitReport Estimator::fit(BatchSource& stream, std::int64_t steps,
                         const std::vector<SessionHook*>& hooks) {
  return run_training_loop(stream, steps, hooks);
}

FitReport Estimator::run_training_loop(BatchSource& stream, std::int64_t steps,
                                       const std::vector<SessionHook*>& hooks) {
  if (steps < 1) {
    throw ValidationError("fit: steps must be >= 1, got " + std::to_string(steps));
  }
  HookDispatcher dispatcher(hooks);
  RunContext ctx;
  ctx.global_step = global_step_;
  ctx.make_checkpoint = [this] { return to_checkpoint(); };

  FitReport report;
  dispatcher.dispatch({HookEventKind::kSessionStart, global_step_, std::nullopt}, ctx);
  for (std::int64_t i = 0; i < steps && !ctx.stop_requested; ++i) {
    std::optional<Batch> batch = stream.next();
    if (!batch) {
      throw TrainingError("training input exhausted after " +
                          std::to_string(report.steps_executed) + " steps");
    }
    validate_input_width(batch->features);
    dispatcher.dispatch({HookEventKind::kBeforeRun, global_step_, std::nullopt}, ctx);

    ModelFnOutput out =
        model_fn_(batch->features, batch->targets, Mode::kTrain, params_, rng_);
    if (!std::isfinite(out.loss)) {
      throw TrainingError("non-finite loss at step " + std::to_string(global_step_ + 1));
    }
    if (!out.train_op) {
      throw InternalError("model function returned no train op in train mode");
    }
    binding_ = out.train_op->optimizer;
    apply_update(params_.tensors(), out.train_op->gradients, *binding_, adagrad_);
    ++global_step_;
    ctx.global_step = global_step_;

    if (report.steps_executed == 0) report.initial_loss = out.loss;
    report.final_loss = out.loss;
    ++report.steps_executed;
    dispatcher.dispatch({HookEventKind::kAfterRun, global_step_, out.loss}, ctx);
  }
  dispatcher.dispatch({HookEventKind::kSessionEnd, global_step_, std::nullopt}, ctx);
  report.global_step = global_step_;
  report.stopped_early = ctx.stop_requested;
  return report;
}

std::map<std::string, Tensor> Estimator::predict(const Tensor& x) const {
  if (params_.empty()) {
    throw StateError("predict: estimator has no parameters; fit or restore first");
  }
  validate_input_width(x);
  return run_model(x, {}, Mode::kInfer).predictions;
}

PredictionStream Estimator::predict_iterable(const Tensor& x) const {
  if (params_.empty()) {
    throw StateError("predict: estimator has no parameters; fit or restore first");
  }
  validate_input_width(x);
  return PredictionStream(*this, x);
}

std::map<std::string, double> Estimator::evaluate(const Tensor& x,
                                                  const std::vector<double>& y,
                                                  const std::set<Metric>& metrics) const {
  if (params_.empty()) {
    throw StateError("evaluate: estimator has no parameters; fit or restore first");
  }
  if (x.rows() != y.size()) {
    throw ValidationError("evaluate: " + std::to_string(x.rows()) +
                          " feature rows vs " + std::to_string(y.size()) + " targets");
  }
  validate_input_width(x);
  const ModelFnOutput out = run_model(x, y, Mode::kEval);
  const double n = static_cast<double>(x.rows());

  std::map<std::string, double> results;
  for (const Metric metric : metrics) {
    switch (metric) {
      case Metric::kAccuracy: {
        auto it = out.predictions.find("class");
        if (it == out.predictions.end()) {
          throw ValidationError("metric 'accuracy' requires a 'class' prediction, which this model does not produce");
        }
        const std::vector<std::int64_t> labels = to_label_vector(y);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (static_cast<std::int64_t>(it->second(i, 0)) == labels[i]) ++correct;
        }
        results["accuracy"] = static_cast<double>(correct) / n;
        break;
      }
      case Metric::kLogLoss: {
        auto it = out.predictions.find("prob");
        if (it == out.predictions.end()) {
          throw ValidationError("metric 'log_loss' requires a 'prob' prediction, which this model does not produce");
        }
        const std::vector<std::int64_t> labels = to_label_vector(y);
        double total = 0.0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= it->second.cols()) {
            throw ValidationError("log_loss: label " + std::to_string(labels[i]) +
                                  " outside [0, " + std::to_string(it->second.cols()) + ")");
          }
          total -= std::log(it->second(i, static_cast<std::size_t>(labels[i])));
        }
        results["log_loss"] = total / n;
        break;
      }
      case Metric::kMse: {
        auto it = out.predictions.find("score");
        if (it == out.predictions.end()) {
          throw ValidationError("metric 'mse' requires a 'score' prediction, which this model does not produce");
        }
        double total = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
          const double diff = it->second(i, 0) - y[i];
          total += diff * diff;
        }
        results["mse"] = total / n;
        break;
      }
    }
  }
  return results;
}

ModelFnOutput Estimator::run_model(const Tensor& x, const std::vector<double>& y,
                                   Mode mode) const {
  if (mode == Mode::kTrain) {
    throw InternalError("run_model is for eval/infer; use fit for training");
  }
  // Non-train modes never create or write parameters (get_or_create rejects
  // creation), so handing the store to the model function keeps this const in
  // behavior. The rng fork keeps the estimator's stream untouched.
  RngState rng_fork = rng_;
  auto& self = const_cast<Estimator&>(*this);
  return model_fn_(x, y, mode, self.params_, rng_fork);
}

Checkpoint Estimator::to_checkpoint() const {
  return Checkpoint{global_step_, params_.tensors()};
}

void Estimator::save_checkpoint(const std::filesystem::path& path) const {
  checkpoint_save(to_checkpoint(), path);
}

void Estimator::adopt_checkpoint(const Checkpoint& ckpt) {
  if (!params_.empty()) {
    std::vector<std::string> problems;
    for (const auto& [name, tensor] : params_.tensors()) {
      auto it = ckpt.tensors.find(name);
      if (it == ckpt.tensors.end()) {
        problems.push_back("missing '" + name + "'");
      } else if (!it->second.same_shape(tensor)) {
        problems.push_back("'" + name + "' is " + it->second.shape_str() +
                           ", model expects " + tensor.shape_str());
      }
    }
    for (const auto& [name, tensor] : ckpt.tensors) {
      if (!params_.contains(name)) {
        problems.push_back("unexpected '" + name + "'");
      }
    }
    if (!problems.empty()) {
      std::ostringstream msg;
      msg << "checkpoint does not match model architecture:";
      for (const std::string& p : problems) msg << " " << p << ";";
      throw ShapeError(msg.str());
    }
  }
  params_.assign(ckpt.tensors);
  global_step_ = ckpt.global_step;
}

void Estimator::restore_checkpoint(const std::filesystem::path& path) {
  adopt_checkpoint(checkpoint_restore(path));
}

void Estimator::adopt_training_result(std::map<std::string, Tensor> params,
                                      std::int64_t global_step, AdagradState adagrad) {
  params_.assign(std::move(params));
  global_step_ = global_step;
  adagrad_ = std::move(adagrad);
}

void Estimator::ensure_prepared(const Tensor& sample_features,
                                const std::vector<double>& sample_targets) {
  if (!params_.empty() && binding_) return;
  ModelFnOutput out =
      model_fn_(sample_features, sample_targets, Mode::kTrain, params_, rng_);
  if (!out.train_op) {
    throw InternalError("model function reported no train op while preparing");
  }
  binding_ = out.train_op->optimizer;
}

std::set<Metric> Estimator::default_metrics() const {
  switch (architecture_.kind) {
    case ModelKind::kLinearRegressor:
      return {Metric::kMse};
    case ModelKind::kDnnClassifier:
    case ModelKind::kLinearClassifier:
    case ModelKind::kLogisticRegressor:
    case ModelKind::kCustom:
      return {Metric::kAccuracy, Metric::kLogLoss};
  }
  return {};
}

std::optional<std::map<std::string, Tensor>> PredictionStream::next() {
  if (row_ >= features_.rows()) return std::nullopt;
  return estimator_->predict(features_.row(row_++));
}

}  // namespace tfln
