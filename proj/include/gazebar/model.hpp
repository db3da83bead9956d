#pragma once

#include <cstddef>
#include <vector>

#include "gazebar/gaze.hpp"
#include "gazebar/layers.hpp"
#include "gazebar/tensor.hpp"

namespace gazebar {

class Rng;

inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageSize = 32;
inline constexpr std::size_t kConv1Channels = 8;
inline constexpr std::size_t kConv2Channels = 16;
inline constexpr std::size_t kFlatDim = kConv2Channels * (kImageSize / 4) * (kImageSize / 4);
inline constexpr std::size_t kFeatureDim = 64;
inline constexpr std::size_t kGazeDim = 2;

/// Gaze regressor: feature extractor
///   conv(3->8) relu pool  conv(8->16) relu pool  dense(1024->64) relu
/// followed by a dense(64->2) head producing (pitch, yaw).
///
/// There is one parameter set; every branch (original, augmented, positive)
/// runs through the same GazeNet instance.
struct GazeNet {
  std::vector<LayerParams> feature_layers;
  LayerParams head;
  std::size_t feature_dim = kFeatureDim;

  /// Zero-valued parameters with the fixed architecture.
  static GazeNet zeros();
  /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) init, layer by layer.
  static GazeNet initialized(Rng& rng);

  std::vector<LayerParams*> layers();
  std::vector<const LayerParams*> layers() const;
  std::size_t parameter_count() const;
  void zero_grad();
};

struct NetOutput {
  Tensor features;  // [feature_dim]
  Tensor gaze;      // [2] = (pitch, yaw)
};

/// Activations kept by a forward pass for the matching backward pass.
struct ForwardCache {
  Tensor input;
  Tensor conv1_pre;
  PoolIndices pool1;
  Tensor pool1_out;
  Tensor conv2_pre;
  PoolIndices pool2;
  Tensor pool2_out;
  Tensor dense1_pre;
  Tensor features;
};

void require_image_shape(const Tensor& image);

NetOutput forward(const GazeNet& net, const Tensor& image);
NetOutput forward(const GazeNet& net, const Tensor& image, ForwardCache& cache);

/// Backpropagates output cotangents through the cached pass and accumulates
/// parameter gradients. `grad_features` may be absent when only the gaze
/// output receives gradient.
void backward(GazeNet& net, const ForwardCache& cache, const Tensor& grad_gaze, const Tensor& grad_features = {});

GazeLabel to_label(const Tensor& gaze);

}  // namespace gazebar
