#include "gazebar/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gazebar {

AdamState AdamState::for_shape(const Shape& shape, double lr) {
  AdamState s;
  s.m = Tensor(shape);
  s.v = Tensor(shape);
  s.lr = lr;
  return s;
}

void adam_step(Tensor& param, Tensor& grad, AdamState& state, const char* what) {
  require_shape(grad, param.shape(), "adam_step gradient");
  require_shape(state.m, param.shape(), "adam_step first moment");
  require_shape(state.v, param.shape(), "adam_step second moment");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw std::runtime_error(std::string("adam_step: non-finite gradient in ") + what + " at index " +
                               std::to_string(i));
    }
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  double* p = param.data();
  double* g = grad.data();
  double* m = state.m.data();
  double* v = state.v.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    g[i] = 0.0;
  }
}

LayerAdam LayerAdam::for_layer(const LayerParams& layer, double lr) {
  return LayerAdam{AdamState::for_shape(layer.weights.shape(), lr), AdamState::for_shape(layer.bias.shape(), lr)};
}

void adam_step(LayerParams& layer, LayerAdam& state) {
  adam_step(layer.weights, layer.grad_weights, state.weights, "weights");
  adam_step(layer.bias, layer.grad_bias, state.bias, "bias");
}

}  // namespace gazebar
