#include "tfln/layers.hpp"

#include <cmath>
#include <string>

#include "tfln/error.hpp"

namespace tfln {

std::pair<Tensor, LayerCache> fully_connected_forward(const Tensor& x,
                                                      const DenseLayerParams& params,
                                                      Activation activation) {
  if (x.cols() != params.weights.rows()) {
    throw ShapeError("fully_connected: input " + x.shape_str() +
                     " incompatible with weights " + params.weights.shape_str());
  }
  if (params.bias.rows() != 1 || params.bias.cols() != params.weights.cols()) {
    throw ShapeError("fully_connected: bias " + params.bias.shape_str() +
                     " incompatible with weights " + params.weights.shape_str());
  }
  Tensor pre = add_row_broadcast(matmul(x, params.weights), params.bias);
  LayerCache cache{x, pre, activation, std::nullopt};
  Tensor out = activation == Activation::kRelu ? relu(pre) : pre;
  return {std::move(out), std::move(cache)};
}

std::pair<Tensor, Tensor> dropout(const Tensor& x, double keep_prob, RngState& rng,
                                  bool training) {
  if (!(keep_prob > 0.0) || keep_prob > 1.0) {
    throw ValidationError("dropout: keep_prob must be in (0, 1], got " +
                          std::to_string(keep_prob));
  }
  if (!training || keep_prob == 1.0) {
    return {x, Tensor(x.rows(), x.cols(), 1.0)};
  }
  const double inv_keep = 1.0 / keep_prob;
  Tensor mask(x.rows(), x.cols());
  Tensor out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double factor = rng.uniform() < keep_prob ? inv_keep : 0.0;
    mask.data()[i] = factor;
    out.data()[i] *= factor;
  }
  return {std::move(out), std::move(mask)};
}

std::pair<Tensor, std::vector<LayerCache>> stack_fully_connected(
    const Tensor& x, const std::vector<DenseLayerParams>& layers, double keep_prob,
    RngState& rng, bool training) {
  if (!layers.empty() && x.cols() != layers.front().in_dim()) {
    throw ShapeError("stack: input width " + std::to_string(x.cols()) +
                     " does not match layer 0 in_dim " +
                     std::to_string(layers.front().in_dim()));
  }
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i - 1].out_dim() != layers[i].in_dim()) {
      throw ShapeError("stack: layer " + std::to_string(i) + " expects in_dim " +
                       std::to_string(layers[i].in_dim()) + " but layer " +
                       std::to_string(i - 1) + " produces " +
                       std::to_string(layers[i - 1].out_dim()));
    }
  }

  std::vector<LayerCache> caches;
  caches.reserve(layers.size());
  Tensor h = x;
  for (const DenseLayerParams& layer : layers) {
    auto [activated, cache] = fully_connected_forward(h, layer, Activation::kRelu);
    auto [dropped, mask] = dropout(activated, keep_prob, rng, training);
    cache.dropout_mask = std::move(mask);
    caches.push_back(std::move(cache));
    h = std::move(dropped);
  }
  return {std::move(h), std::move(caches)};
}

std::pair<std::vector<DenseLayerGrads>, Tensor> backward_stack(
    const std::vector<LayerCache>& caches, const std::vector<DenseLayerParams>& params,
    const Tensor& dout) {
  if (caches.size() != params.size()) {
    throw InternalError("backward_stack: " + std::to_string(caches.size()) +
                        " caches vs " + std::to_string(params.size()) + " param sets");
  }
  std::vector<DenseLayerGrads> grads(params.size());
  Tensor d = dout;
  for (std::size_t idx = params.size(); idx-- > 0;) {
    const LayerCache& cache = caches[idx];
    if (cache.dropout_mask) {
      d = hadamard(d, *cache.dropout_mask);
    }
    if (cache.activation == Activation::kRelu) {
      if (!d.same_shape(cache.pre_activation)) {
        throw ShapeError("backward_stack: gradient " + d.shape_str() +
                         " vs pre-activation " + cache.pre_activation.shape_str() +
                         " at layer " + std::to_string(idx));
      }
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (cache.pre_activation.data()[i] <= 0.0) d.data()[i] = 0.0;
      }
    }
    grads[idx].dweights = matmul(transpose(cache.input), d);
    grads[idx].dbias = column_sums(d);
    d = matmul(d, transpose(params[idx].weights));
  }
  return {std::move(grads), std::move(d)};
}

DenseLayerParams glorot_init(std::size_t in_dim, std::size_t out_dim, RngState& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  Tensor weights(in_dim, out_dim);
  for (double& w : weights.data()) w = rng.uniform(-bound, bound);
  return {std::move(weights), Tensor(1, out_dim, 0.0)};
}

DenseLayerParams zero_init(std::size_t in_dim, std::size_t out_dim) {
  return {Tensor(in_dim, out_dim, 0.0), Tensor(1, out_dim, 0.0)};
}

}  // namespace tfln
