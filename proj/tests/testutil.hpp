#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "tfln/estimator.hpp"
#include "tfln/layers.hpp"
#include "tfln/losses.hpp"
#include "tfln/rng.hpp"
#include "tfln/tensor.hpp"

namespace tfln::testutil {

/// A relu stack plus a linear output head, the shape every gradient check
/// works over.
struct SmallNet {
  std::vector<DenseLayerParams> hidden;
  DenseLayerParams output;

  std::vector<DenseLayerParams> all_params() const {
    std::vector<DenseLayerParams> all = hidden;
    all.push_back(output);
    return all;
  }
};

inline SmallNet random_net(const std::vector<std::size_t>& dims, std::size_t n_classes,
                           RngState& rng) {
  SmallNet net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    net.hidden.push_back(glorot_init(dims[i], dims[i + 1], rng));
    for (double& b : net.hidden.back().bias.data()) b = rng.uniform(-0.5, 0.5);
  }
  net.output = glorot_init(dims.back(), n_classes, rng);
  for (double& b : net.output.bias.data()) b = rng.uniform(-0.5, 0.5);
  return net;
}

inline Tensor random_tensor(std::size_t rows, std::size_t cols, RngState& rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Forward loss of the net (keep_prob 1, no dropout randomness).
inline double net_loss(const SmallNet& net, const Tensor& x, const Tensor& onehot) {
  RngState rng(0);
  auto [h, caches] = stack_fully_connected(x, net.hidden, 1.0, rng, true);
  auto [logits, cache] = fully_connected_forward(h, net.output, Activation::kNone);
  return softmax_cross_entropy(logits, onehot).first;
}

/// Analytic gradients for the net via backward_stack.
inline std::vector<DenseLayerGrads> net_gradients(const SmallNet& net, const Tensor& x,
                                                  const Tensor& onehot) {
  RngState rng(0);
  auto [h, caches] = stack_fully_connected(x, net.hidden, 1.0, rng, true);
  auto [logits, cache] = fully_connected_forward(h, net.output, Activation::kNone);
  caches.push_back(cache);
  auto [loss, dlogits] = softmax_cross_entropy(logits, onehot);
  (void)loss;
  return backward_stack(caches, net.all_params(), dlogits).first;
}

/// Central finite differences of net_loss w.r.t. one parameter element.
inline double fd_gradient(SmallNet net, bool weight, std::size_t layer, std::size_t idx,
                          const Tensor& x, const Tensor& onehot, double h = 1e-6) {
  auto& element = [&]() -> double& {
    DenseLayerParams& p =
        layer < net.hidden.size() ? net.hidden[layer] : net.output;
    return weight ? p.weights.data()[idx] : p.bias.data()[idx];
  }();
  const double saved = element;
  element = saved + h;
  const double up = net_loss(net, x, onehot);
  element = saved - h;
  const double down = net_loss(net, x, onehot);
  element = saved;
  return (up - down) / (2.0 * h);
}

/// Gradcheck relative error with a floor, so near-zero gradients are judged
/// on absolute difference against the floor.
inline double rel_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Largest gradcheck error over every parameter element of a random net.
inline double max_gradcheck_error(const SmallNet& net, const Tensor& x,
                                  const Tensor& onehot) {
  const std::vector<DenseLayerGrads> grads = net_gradients(net, x, onehot);
  double worst = 0.0;
  const std::size_t n_layers = grads.size();
  for (std::size_t layer = 0; layer < n_layers; ++layer) {
    for (std::size_t k = 0; k < grads[layer].dweights.size(); ++k) {
      const double fd = fd_gradient(net, true, layer, k, x, onehot);
      worst = std::max(worst, rel_error(grads[layer].dweights.data()[k], fd));
    }
    for (std::size_t k = 0; k < grads[layer].dbias.size(); ++k) {
      const double fd = fd_gradient(net, false, layer, k, x, onehot);
      worst = std::max(worst, rel_error(grads[layer].dbias.data()[k], fd));
    }
  }
  return worst;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tfln_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline bool same_tensors(const std::map<std::string, Tensor>& a,
                         const std::map<std::string, Tensor>& b) {
  return a == b;
}

/// The custom three-class model function exercised end to end against the
/// generic Estimator: one-hot targets, a stacked [10, 20, 10] relu network
/// with dropout keep_prob 0.9 in training, a linear 3-way output, softmax
/// cross-entropy, and Adagrad at learning rate 0.1.
inline ModelFn custom_dropout_model_fn(double keep_prob = 0.9) {
  return [keep_prob](const Tensor& features, const std::vector<double>& targets,
                     Mode mode, ParameterStore& store, RngState& rng) -> ModelFnOutput {
    const std::vector<std::size_t> dims{features.cols(), 10, 20, 10};
    std::vector<DenseLayerParams> hidden;
    std::vector<std::string> names;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      names.push_back("fc_" + std::to_string(i));
      hidden.push_back(dense_layer_params(
          store, names.back(), dims[i], dims[i + 1], mode,
          [&] { return glorot_init(dims[i], dims[i + 1], rng); }));
    }
    DenseLayerParams head = dense_layer_params(
        store, "logits", 10, 3, mode, [&] { return glorot_init(10, 3, rng); });
    names.push_back("logits");

    auto [h, caches] =
        stack_fully_connected(features, hidden, keep_prob, rng, mode == Mode::kTrain);
    auto [logits, head_cache] = fully_connected_forward(h, head, Activation::kNone);

    ModelFnOutput out;
    const Tensor prob = softmax_rows(logits);
    const std::vector<std::int64_t> classes = argmax_rows(prob);
    Tensor class_tensor(classes.size(), 1);
    for (std::size_t i = 0; i < classes.size(); ++i) {
      class_tensor(i, 0) = static_cast<double>(classes[i]);
    }
    out.predictions["class"] = std::move(class_tensor);
    out.predictions["prob"] = prob;
    if (mode == Mode::kInfer) return out;

    const Tensor target = one_hot(to_label_vector(targets), 3, 1.0, 0.0);
    auto [loss, dlogits] = softmax_cross_entropy(logits, target);
    out.loss = loss;
    if (mode != Mode::kTrain) return out;

    caches.push_back(std::move(head_cache));
    std::vector<DenseLayerParams> all = std::move(hidden);
    all.push_back(std::move(head));
    auto [grads, dinput] = backward_stack(caches, all, dlogits);
    TrainOp op;
    op.optimizer = {OptimizerKind::kAdagrad, 0.1};
    for (std::size_t i = 0; i < grads.size(); ++i) {
      op.gradients[names[i] + "/weights"] = std::move(grads[i].dweights);
      op.gradients[names[i] + "/bias"] = std::move(grads[i].dbias);
    }
    out.train_op = std::move(op);
    return out;
  };
}

}  // namespace tfln::testutil
