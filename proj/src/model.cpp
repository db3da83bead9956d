#include "gazebar/model.hpp"

#include <stdexcept>

#include "gazebar/rng.hpp"

namespace gazebar {

GazeNet GazeNet::zeros() {
  GazeNet net;
  net.feature_layers.push_back(LayerParams::conv2d(kImageChannels, kConv1Channels));
  net.feature_layers.push_back(LayerParams::conv2d(kConv1Channels, kConv2Channels));
  net.feature_layers.push_back(LayerParams::dense(kFlatDim, kFeatureDim));
  net.head = LayerParams::dense(kFeatureDim, kGazeDim);
  net.feature_dim = kFeatureDim;
  return net;
}

GazeNet GazeNet::initialized(Rng& rng) {
  GazeNet net = zeros();
  for (LayerParams* layer : net.layers()) layer->init_uniform(rng);
  return net;
}

std::vector<LayerParams*> GazeNet::layers() {
  std::vector<LayerParams*> out;
  for (auto& l : feature_layers) out.push_back(&l);
  out.push_back(&head);
  return out;
}

std::vector<const LayerParams*> GazeNet::layers() const {
  std::vector<const LayerParams*> out;
  for (const auto& l : feature_layers) out.push_back(&l);
  out.push_back(&head);
  return out;
}

std::size_t GazeNet::parameter_count() const {
  std::size_t n = 0;
  for (const LayerParams* l : layers()) n += l->weights.size() + l->bias.size();
  return n;
}

void GazeNet::zero_grad() {
  for (LayerParams* l : layers()) l->zero_grad();
}

void require_image_shape(const Tensor& image) {
  require_shape(image, Shape{kImageChannels, kImageSize, kImageSize}, "gaze network input");
}

namespace {

void require_architecture(const GazeNet& net) {
  if (net.feature_layers.size() != 3) throw std::invalid_argument("gaze network must have 3 feature layers");
}

}  // namespace

NetOutput forward(const GazeNet& net, const Tensor& image, ForwardCache& cache) {
  require_image_shape(image);
  require_architecture(net);
  cache.input = image;
  cache.conv1_pre = conv2d_forward(cache.input, net.feature_layers[0]);
  auto [p1, i1] = maxpool2x2(relu(cache.conv1_pre));
  cache.pool1_out = std::move(p1);
  cache.pool1 = std::move(i1);
  cache.conv2_pre = conv2d_forward(cache.pool1_out, net.feature_layers[1]);
  auto [p2, i2] = maxpool2x2(relu(cache.conv2_pre));
  cache.pool2_out = std::move(p2);
  cache.pool2 = std::move(i2);
  cache.dense1_pre = dense_forward(cache.pool2_out, net.feature_layers[2]);
  cache.features = relu(cache.dense1_pre);
  NetOutput out{cache.features, dense_forward(cache.features, net.head)};
  if (!out.gaze.all_finite() || !out.features.all_finite()) {
    throw std::runtime_error("gaze network produced non-finite output");
  }
  return out;
}

NetOutput forward(const GazeNet& net, const Tensor& image) {
  ForwardCache scratch;
  return forward(net, image, scratch);
}

void backward(GazeNet& net, const ForwardCache& cache, const Tensor& grad_gaze, const Tensor& grad_features) {
  require_architecture(net);
  if (cache.features.empty()) throw std::invalid_argument("backward: missing forward cache");
  Tensor g = dense_backward(grad_gaze, cache.features, net.head);
  if (!grad_features.empty()) {
    require_shape(grad_features, g.shape(), "backward grad_features");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad_features[i];
  }
  g = relu_backward(g, cache.dense1_pre);
  g = dense_backward(g, cache.pool2_out, net.feature_layers[2]);
  g = maxpool_backward(g, cache.pool2);
  g = relu_backward(g, cache.conv2_pre);
  g = conv2d_backward(g, cache.pool1_out, net.feature_layers[1]);
  g = maxpool_backward(g, cache.pool1);
  g = relu_backward(g, cache.conv1_pre);
  conv2d_backward(g, cache.input, net.feature_layers[0], /*want_grad_input=*/false);
}

GazeLabel to_label(const Tensor& gaze) {
  if (gaze.size() != kGazeDim) throw std::invalid_argument("gaze tensor must have 2 elements");
  return GazeLabel{gaze[0], gaze[1]};
}

}  // namespace gazebar
