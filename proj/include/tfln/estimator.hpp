#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tfln/checkpoint.hpp"
#include "tfln/dataset.hpp"
#include "tfln/hooks.hpp"
#include "tfln/layers.hpp"
#include "tfln/optimizers.hpp"
#include "tfln/rng.hpp"
#include "tfln/run_config.hpp"
#include "tfln/tensor.hpp"

namespace tfln {

enum class Mode { kTrain, kEval, kInfer };

/// Named parameter tensors owned by an estimator.
class ParameterStore {
 public:
  bool empty() const { return tensors_.empty(); }
  bool contains(const std::string& name) const { return tensors_.contains(name); }

  const Tensor& get(const std::string& name) const;

  void put(const std::string& name, Tensor tensor);
  void assign(std::map<std::string, Tensor> tensors) { tensors_ = std::move(tensors); }

  std::map<std::string, Tensor>& tensors() { return tensors_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  /// Returns the named tensor, creating it with `init` when absent. Creation
  /// is permitted only in train mode; a missing parameter in eval or infer
  /// mode means the model was never fitted, which is a StateError. An
  /// existing tensor whose shape disagrees raises ShapeError.
  Tensor& get_or_create(const std::string& name, std::size_t rows, std::size_t cols,
                        Mode mode, const std::function<Tensor()>& init);

 private:
  std::map<std::string, Tensor> tensors_;
};

/// The parameter update a model function wants applied after a train step.
struct TrainOp {
  OptimizerBinding optimizer;
  std::map<std::string, Tensor> gradients;
};

/// What a model function returns: named prediction tensors (classifiers
/// produce "class" and "prob", regressors "score"), the scalar loss, and in
/// train mode the update to apply.
struct ModelFnOutput {
  std::map<std::string, Tensor> predictions;
  double loss = 0.0;
  std::optional<TrainOp> train_op;
};

/// A model function maps a batch to predictions, loss, and a train op. It
/// reads (and in train mode may create) parameters in the store; it must not
/// write parameters in eval or infer mode. `targets` is empty in infer mode.
using ModelFn = std::function<ModelFnOutput(
    const Tensor& features, const std::vector<double>& targets, Mode mode,
    ParameterStore& params, RngState& rng)>;

enum class Metric { kAccuracy, kMse, kLogLoss };

std::string to_string(Metric metric);
Metric metric_from_string(const std::string& name);

enum class ModelKind {
  kCustom,
  kDnnClassifier,
  kLinearRegressor,
  kLinearClassifier,
  kLogisticRegressor,
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Structural metadata recorded by the canned factories; exports use it to
/// rebuild an identical estimator in a fresh process.
struct ArchitectureInfo {
  ModelKind kind = ModelKind::kCustom;
  std::size_t n_features = 0;
  std::optional<std::size_t> n_classes;
  std::vector<std::size_t> hidden_units;
};

struct FitReport {
  std::int64_t steps_executed = 0;
  std::int64_t global_step = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool stopped_early = false;
};

/// Lazy per-row prediction stream (the as_iterable=true form of predict).
/// Rows are computed on demand; values are identical to the whole-tensor
/// form. The estimator must outlive the stream.
class PredictionStream;

/// An estimator owns a model function, its named parameters, optimizer state,
/// and the global step, and provides fit / predict / evaluate plus checkpoint
/// persistence. Canned estimators come from the static factories; any model
/// can be built by passing a custom model function to the constructor.
class Estimator {
 public:
  explicit Estimator(ModelFn model_fn, RunConfig config = {},
                     std::uint64_t seed = 42);

  /// Dense relu stack per hidden_units, linear output layer of width
  /// n_classes, softmax cross-entropy, Adagrad(lr=0.1). Parameters are
  /// Glorot-initialized at construction from `seed`.
  static Estimator dnn_classifier(const std::vector<FeatureColumn>& feature_columns,
                                  const std::vector<std::size_t>& hidden_units,
                                  std::size_t n_classes, RunConfig config,
                                  std::uint64_t seed);

  /// Single dense layer, mse loss, SGD(lr=0.1); zero-initialized, so the
  /// unfitted model predicts 0.
  static Estimator linear_regressor(const std::vector<FeatureColumn>& feature_columns,
                                    RunConfig config, std::uint64_t seed);

  /// Single dense layer, softmax cross-entropy, SGD(lr=0.1); zero-initialized.
  static Estimator linear_classifier(const std::vector<FeatureColumn>& feature_columns,
                                     std::size_t n_classes, RunConfig config,
                                     std::uint64_t seed);

  /// Two-class logistic regression: single logit, sigmoid cross-entropy,
  /// SGD(lr=0.1); zero-initialized.
  static Estimator logistic_regressor(const std::vector<FeatureColumn>& feature_columns,
                                      RunConfig config, std::uint64_t seed);

  /// Runs the training loop for `steps` steps over the full batch (x, y), or
  /// until a hook requests stop. Resuming fit continues from the current
  /// global step.
  FitReport fit(const Tensor& x, const std::vector<double>& y, std::int64_t steps,
                const std::vector<SessionHook*>& hooks = {});

  /// Same loop over an arbitrary batch stream (e.g. a feeding queue).
  FitReport fit(BatchSource& stream, std::int64_t steps,
                const std::vector<SessionHook*>& hooks = {});

  /// Inference over all rows at once (dropout off). Classifiers return
  /// "class" and "prob"; regressors return "score".
  std::map<std::string, Tensor> predict(const Tensor& x) const;

  /// Lazy per-row inference (as_iterable=true).
  PredictionStream predict_iterable(const Tensor& x) const;

  std::map<std::string, double> evaluate(const Tensor& x, const std::vector<double>& y,
                                         const std::set<Metric>& metrics) const;

  /// Runs the model function once in the given mode without applying updates.
  ModelFnOutput run_model(const Tensor& x, const std::vector<double>& y,
                          Mode mode) const;

  std::int64_t global_step() const { return global_step_; }
  const ParameterStore& parameters() const { return params_; }
  const RunConfig& config() const { return config_; }
  const ArchitectureInfo& architecture() const { return architecture_; }
  const ModelFn& model_fn() const { return model_fn_; }
  const std::optional<OptimizerBinding>& optimizer_binding() const { return binding_; }
  const AdagradState& adagrad_state() const { return adagrad_; }

  Checkpoint to_checkpoint() const;
  void save_checkpoint(const std::filesystem::path& path) const;

  /// Adopts a checkpoint's tensors and step. If the estimator already has
  /// parameters, every restored name and shape must match; mismatches raise
  /// ShapeError listing the offending names.
  void adopt_checkpoint(const Checkpoint& ckpt);
  void restore_checkpoint(const std::filesystem::path& path);

  /// Installs the final state of a distributed run.
  void adopt_training_result(std::map<std::string, Tensor> params,
                             std::int64_t global_step, AdagradState adagrad);

  /// Guarantees parameters and the optimizer binding exist, running one
  /// train-mode model call (update discarded) if needed. Canned estimators
  /// are always prepared; for custom models this may advance the rng stream
  /// (e.g. a dropout draw).
  void ensure_prepared(const Tensor& sample_features,
                       const std::vector<double>& sample_targets);

  /// Default evaluation metrics for this model kind.
  std::set<Metric> default_metrics() const;

 private:
  void validate_input_width(const Tensor& x) const;
  FitReport run_training_loop(BatchSource& stream, std::int64_t steps,
                              const std::vector<SessionHook*>& hooks);

  ModelFn model_fn_;
  RunConfig config_;
  ParameterStore params_;
  AdagradState adagrad_;
  RngState rng_;
  std::int64_t global_step_ = 0;
  std::optional<OptimizerBinding> binding_;
  ArchitectureInfo architecture_;
};

class PredictionStream {
 public:
  /// Next row's predictions (each tensor 1 x k), or nullopt when exhausted.
  std::optional<std::map<std::string, Tensor>> next();

  std::size_t remaining() const { return features_.rows() - row_; }

 private:
  friend class Estimator;
  PredictionStream(const Estimator& estimator, Tensor features)
      : estimator_(&estimator), features_(std::move(features)) {}

  const Estimator* estimator_;
  Tensor features_;
  std::size_t row_ = 0;
};

/// Fetches dense-layer parameters from the store (creating them in train
/// mode with `init`), named `<prefix>/weights` and `<prefix>/bias`.
DenseLayerParams dense_layer_params(ParameterStore& store, const std::string& prefix,
                                    std::size_t in_dim, std::size_t out_dim, Mode mode,
                                    const std::function<DenseLayerParams()>& init);

/// Total width of a feature schema.
std::size_t schema_width(const std::vector<FeatureColumn>& columns);

}  // namespace tfln
