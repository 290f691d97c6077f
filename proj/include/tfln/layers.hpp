#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "tfln/rng.hpp"
#include "tfln/tensor.hpp"

namespace tfln {

enum class Activation { kNone, kRelu };

/// Parameters of one dense layer: weights (in x out) and a bias row (1 x out).
struct DenseLayerParams {
  Tensor weights;
  Tensor bias;

  std::size_t in_dim() const { return weights.rows(); }
  std::size_t out_dim() const { return weights.cols(); }
};

/// Everything the backward pass needs about one forward layer application.
///
/// dropout_mask, when present, holds the multiplicative factors applied after
/// the activation (0 for dropped elements, 1/keep_prob for kept ones), so
/// the backward pass reuses the exact mask instead of resampling.
struct LayerCache {
  Tensor input;
  Tensor pre_activation;
  Activation activation = Activation::kNone;
  std::optional<Tensor> dropout_mask;
};

/// Gradients for one dense layer, shaped like its parameters.
struct DenseLayerGrads {
  Tensor dweights;
  Tensor dbias;
};

/// y = activation(x * W + b), plus the cache for backprop.
std::pair<Tensor, LayerCache> fully_connected_forward(const Tensor& x,
                                                      const DenseLayerParams& params,
                                                      Activation activation);

/// Inverted dropout. In training each element is kept with probability
/// keep_prob and scaled by 1/keep_prob; in inference (or keep_prob == 1, which
/// draws nothing from the rng) the output equals the input and the mask is all
/// ones. Returns (output, mask); the mask stores the multiplicative factors.
std::pair<Tensor, Tensor> dropout(const Tensor& x, double keep_prob, RngState& rng,
                                  bool training);

/// Relu dense layers followed by dropout, applied in order. Returns the final
/// activation and one cache per layer.
std::pair<Tensor, std::vector<LayerCache>> stack_fully_connected(
    const Tensor& x, const std::vector<DenseLayerParams>& layers, double keep_prob,
    RngState& rng, bool training);

/// Exact reverse-mode gradients through the layers that produced `caches`
/// (dense, activation, dropout). `dout` is the loss gradient w.r.t. the final
/// output. Returns per-layer parameter gradients plus the gradient w.r.t. the
/// first layer's input.
std::pair<std::vector<DenseLayerGrads>, Tensor> backward_stack(
    const std::vector<LayerCache>& caches, const std::vector<DenseLayerParams>& params,
    const Tensor& dout);

/// Glorot-uniform weights in +-sqrt(6/(in+out)); zero bias.
DenseLayerParams glorot_init(std::size_t in_dim, std::size_t out_dim, RngState& rng);

/// All-zero weights and bias (used by the canned linear estimators).
DenseLayerParams zero_init(std::size_t in_dim, std::size_t out_dim);

}  // namespace tfln
