#pragma once

#include <cstdint>

#include "gazebar/layers.hpp"
#include "gazebar/tensor.hpp"

namespace gazebar {

/// Moment estimates for one parameter tensor plus the optimizer settings.
struct AdamState {
  Tensor m;
  Tensor v;
  std::uint64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_shape(const Shape& shape, double lr = 1e-4);
};

/// Bias-corrected Adam update of `param` from `grad`; zeroes `grad` afterwards.
/// Throws std::runtime_error (naming `what`) on a non-finite gradient.
void adam_step(Tensor& param, Tensor& grad, AdamState& state, const char* what = "parameter");

struct LayerAdam {
  AdamState weights;
  AdamState bias;

  static LayerAdam for_layer(const LayerParams& layer, double lr = 1e-4);
};

void adam_step(LayerParams& layer, LayerAdam& state);

}  // namespace gazebar
