#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "gazebar/tensor.hpp"

namespace gazebar {

class Rng;

enum class LayerKind : std::uint32_t { conv2d = 0, dense = 1 };

/// Trainable layer: conv weights are [out_ch, in_ch, 3, 3], dense weights
/// are [out, in]. Gradient buffers always mirror the parameter shapes.
struct LayerParams {
  LayerKind kind = LayerKind::dense;
  Tensor weights;
  Tensor bias;
  Tensor grad_weights;
  Tensor grad_bias;

  static LayerParams conv2d(std::size_t in_channels, std::size_t out_channels);
  static LayerParams dense(std::size_t in_features, std::size_t out_features);

  std::size_t in_dim() const { return weights.dim(1); }
  std::size_t out_dim() const { return weights.dim(0); }
  std::size_t fan_in() const;

  /// Uniform in [-s, s] with s = sqrt(1 / fan_in), weights then bias.
  void init_uniform(Rng& rng);
  void zero_grad();
};

inline constexpr std::size_t kConvKernel = 3;

/// 3x3 convolution, stride 1, zero padding 1. Output keeps H and W.
Tensor conv2d_forward(const Tensor& input, const LayerParams& params);
/// Returns grad w.r.t. input and accumulates into params.grad_*. With
/// `want_grad_input` false only the parameter gradients are formed and an
/// absent tensor is returned (first layer of a network).
Tensor conv2d_backward(const Tensor& grad_out, const Tensor& cached_input, LayerParams& params,
                       bool want_grad_input = true);

/// y = W x + b. Any input whose element count equals in_dim is accepted
/// (flattened in row-major order).
Tensor dense_forward(const Tensor& input, const LayerParams& params);
Tensor dense_backward(const Tensor& grad_out, const Tensor& cached_input, LayerParams& params);

Tensor relu(const Tensor& input);
/// Gradient passes only where cached_input > 0 (subgradient 0 at 0).
Tensor relu_backward(const Tensor& grad_out, const Tensor& cached_input);

struct PoolIndices {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// 2x2 max pooling, stride 2. Ties resolve to the lowest flat index.
std::pair<Tensor, PoolIndices> maxpool2x2(const Tensor& input);
Tensor maxpool_backward(const Tensor& grad_out, const PoolIndices& indices);

}  // namespace gazebar
