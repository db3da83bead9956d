#include "gazebar/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gazebar/rng.hpp"

namespace gazebar {

LayerParams LayerParams::conv2d(std::size_t in_channels, std::size_t out_channels) {
  LayerParams p;
  p.kind = LayerKind::conv2d;
  const Shape wshape{out_channels, in_channels, kConvKernel, kConvKernel};
  p.weights = Tensor(wshape);
  p.grad_weights = Tensor(wshape);
  p.bias = Tensor(Shape{out_channels});
  p.grad_bias = Tensor(Shape{out_channels});
  return p;
}

LayerParams LayerParams::dense(std::size_t in_features, std::size_t out_features) {
  LayerParams p;
  p.kind = LayerKind::dense;
  const Shape wshape{out_features, in_features};
  p.weights = Tensor(wshape);
  p.grad_weights = Tensor(wshape);
  p.bias = Tensor(Shape{out_features});
  p.grad_bias = Tensor(Shape{out_features});
  return p;
}

std::size_t LayerParams::fan_in() const {
  return kind == LayerKind::conv2d ? in_dim() * kConvKernel * kConvKernel : in_dim();
}

void LayerParams::init_uniform(Rng& rng) {
  const double s = std::sqrt(1.0 / static_cast<double>(fan_in()));
  for (double& w : weights.values()) w = rng.uniform(-s, s);
  for (double& b : bias.values()) b = rng.uniform(-s, s);
}

void LayerParams::zero_grad() {
  grad_weights.fill(0.0);
  grad_bias.fill(0.0);
}

namespace {

void require_conv_input(const Tensor& input, const LayerParams& params, const char* what) {
  if (params.kind != LayerKind::conv2d) throw std::invalid_argument(std::string(what) + ": layer is not conv2d");
  if (input.rank() != 3 || input.dim(0) != params.in_dim()) {
    throw std::invalid_argument(std::string(what) + ": input shape " + shape_str(input.shape()) +
                                " incompatible with weights " + shape_str(params.weights.shape()));
  }
}

constexpr std::size_t kCoBlock = 4;
constexpr std::size_t kPixBlock = 32;
constexpr std::size_t kKBlock = 3;  // every 3x3 kernel row count is a multiple
constexpr std::size_t kLanes = 8;

// Per-thread scratch, reused across calls; fresh allocations of this size
// go through mmap and page-fault on every call.
std::vector<double>& scratch(int slot, std::size_t n) {
  thread_local std::vector<double> buffers[2];
  std::vector<double>& b = buffers[slot];
  b.assign(n, 0.0);
  return b;
}

// Rows (ci, ky, kx) of the unrolled 3x3 neighborhoods, each h*w long, zero
// where the neighborhood leaves the image.
const std::vector<double>& im2col(const double* in, std::size_t cin, std::size_t h, std::size_t w) {
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  std::vector<double>& col = scratch(0, cin * 9 * h * w);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const double* ic = in + ci * h * w;
    for (long ky = 0; ky < 3; ++ky) {
      const long dy = ky - 1;
      const long y0 = std::max(0L, -dy), y1 = std::min(H, H - dy);
      for (long kx = 0; kx < 3; ++kx) {
        const long dx = kx - 1;
        const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
        double* row = col.data() + ((ci * 9) + static_cast<std::size_t>(ky * 3 + kx)) * h * w;
        for (long y = y0; y < y1; ++y) {
          std::copy(ic + (y + dy) * W + dx + x0, ic + (y + dy) * W + dx + x1, row + y * W + x0);
        }
      }
    }
  }
  return col;
}

void col2im_add(const std::vector<double>& col, double* out, std::size_t cin, std::size_t h, std::size_t w) {
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    double* oc = out + ci * h * w;
    for (long ky = 0; ky < 3; ++ky) {
      const long dy = ky - 1;
      const long y0 = std::max(0L, -dy), y1 = std::min(H, H - dy);
      for (long kx = 0; kx < 3; ++kx) {
        const long dx = kx - 1;
        const long x0 = std::max(0L, -dx), x1 = std::min(W, W - dx);
        const double* row = col.data() + ((ci * 9) + static_cast<std::size_t>(ky * 3 + kx)) * h * w;
        for (long y = y0; y < y1; ++y) {
          double* orow = oc + (y + dy) * W + dx;
          const double* crow = row + y * W;
          for (long x = x0; x < x1; ++x) orow[x] += crow[x];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const LayerParams& params) {
  require_conv_input(input, params, "conv2d_forward");
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = params.out_dim(), hw = h * w, kn = cin * 9;
  Tensor out(Shape{cout, h, w});
  const std::vector<double>& col = im2col(input.data(), cin, h, w);
  const double* wt = params.weights.data();

  if (cout % kCoBlock == 0 && hw % kPixBlock == 0) {
    // Register-blocked: kCoBlock output channels by kPixBlock pixels.
    for (std::size_t co0 = 0; co0 < cout; co0 += kCoBlock) {
      for (std::size_t i0 = 0; i0 < hw; i0 += kPixBlock) {
        double acc[kCoBlock][kPixBlock];
        for (std::size_t j = 0; j < kCoBlock; ++j) {
          for (std::size_t t = 0; t < kPixBlock; ++t) acc[j][t] = params.bias[co0 + j];
        }
        for (std::size_t k = 0; k < kn; ++k) {
          const double* __restrict row = col.data() + k * hw + i0;
          for (std::size_t j = 0; j < kCoBlock; ++j) {
            const double kv = wt[(co0 + j) * kn + k];
#pragma omp simd
            for (std::size_t t = 0; t < kPixBlock; ++t) acc[j][t] += kv * row[t];
          }
        }
        for (std::size_t j = 0; j < kCoBlock; ++j) {
          std::copy(acc[j], acc[j] + kPixBlock, out.data() + (co0 + j) * hw + i0);
        }
      }
    }
    return out;
  }
  for (std::size_t co = 0; co < cout; ++co) {
    double* __restrict oc = out.data() + co * hw;
    std::fill(oc, oc + hw, params.bias[co]);
    for (std::size_t k = 0; k < kn; ++k) {
      const double kv = wt[co * kn + k];
      const double* __restrict row = col.data() + k * hw;
#pragma omp simd
      for (std::size_t i = 0; i < hw; ++i) oc[i] += kv * row[i];
    }
  }
  return out;
}

Tensor conv2d_backward(const Tensor& grad_out, const Tensor& cached_input, LayerParams& params,
                       bool want_grad_input) {
  if (cached_input.empty()) throw std::invalid_argument("conv2d_backward: missing forward cache");
  require_conv_input(cached_input, params, "conv2d_backward");
  const std::size_t cin = cached_input.dim(0), h = cached_input.dim(1), w = cached_input.dim(2);
  const std::size_t cout = params.out_dim(), hw = h * w, kn = cin * 9;
  require_shape(grad_out, Shape{cout, h, w}, "conv2d_backward grad_out");

  const std::vector<double>& col = im2col(cached_input.data(), cin, h, w);
  std::vector<double>& grad_col = scratch(1, want_grad_input ? kn * hw : 0);
  const double* wt = params.weights.data();
  double* gw = params.grad_weights.data();

  if (cout % kCoBlock == 0 && hw % kPixBlock == 0) {
    const double* g = grad_out.data();
    for (std::size_t co = 0; co < cout; ++co) {
      double bsum = 0.0;
#pragma omp simd reduction(+ : bsum)
      for (std::size_t i = 0; i < hw; ++i) bsum += g[co * hw + i];
      params.grad_bias[co] += bsum;
    }
    // Weight gradient: kCoBlock x kKBlock dot products of length hw at once.
    for (std::size_t co0 = 0; co0 < cout; co0 += kCoBlock) {
      for (std::size_t k0 = 0; k0 < kn; k0 += kKBlock) {
        double acc[kCoBlock][kKBlock][kLanes] = {};
        for (std::size_t i0 = 0; i0 < hw; i0 += kLanes) {
          for (std::size_t j = 0; j < kCoBlock; ++j) {
            const double* __restrict gr = g + (co0 + j) * hw + i0;
            for (std::size_t m = 0; m < kKBlock; ++m) {
              const double* __restrict cr = col.data() + (k0 + m) * hw + i0;
#pragma omp simd
              for (std::size_t t = 0; t < kLanes; ++t) acc[j][m][t] += gr[t] * cr[t];
            }
          }
        }
        for (std::size_t j = 0; j < kCoBlock; ++j) {
          for (std::size_t m = 0; m < kKBlock; ++m) {
            double sum = 0.0;
            for (std::size_t t = 0; t < kLanes; ++t) sum += acc[j][m][t];
            gw[(co0 + j) * kn + k0 + m] += sum;
          }
        }
      }
    }
    if (want_grad_input) {
      for (std::size_t k0 = 0; k0 < kn; k0 += kKBlock) {
        for (std::size_t i0 = 0; i0 < hw; i0 += kPixBlock) {
          double acc[kKBlock][kPixBlock] = {};
          for (std::size_t co = 0; co < cout; ++co) {
            const double* __restrict gr = g + co * hw + i0;
            for (std::size_t m = 0; m < kKBlock; ++m) {
              const double kv = wt[co * kn + k0 + m];
#pragma omp simd
              for (std::size_t t = 0; t < kPixBlock; ++t) acc[m][t] += kv * gr[t];
            }
          }
          for (std::size_t m = 0; m < kKBlock; ++m) {
            std::copy(acc[m], acc[m] + kPixBlock, grad_col.data() + (k0 + m) * hw + i0);
          }
        }
      }
    }
  } else {
    for (std::size_t co = 0; co < cout; ++co) {
      const double* __restrict gc = grad_out.data() + co * hw;
      double bsum = 0.0;
  #pragma omp simd reduction(+ : bsum)
      for (std::size_t i = 0; i < hw; ++i) bsum += gc[i];
      params.grad_bias[co] += bsum;

      for (std::size_t k = 0; k < kn; ++k) {
        const double* __restrict row = col.data() + k * hw;
        double acc = 0.0;
  #pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < hw; ++i) acc += gc[i] * row[i];
        gw[co * kn + k] += acc;
        if (want_grad_input) {
          const double kv = wt[co * kn + k];
          double* __restrict grow = grad_col.data() + k * hw;
  #pragma omp simd
          for (std::size_t i = 0; i < hw; ++i) grow[i] += kv * gc[i];
        }
      }
    }
  }
  if (!want_grad_input) return Tensor();
  Tensor grad_in(cached_input.shape());
  col2im_add(grad_col, grad_in.data(), cin, h, w);
  return grad_in;
}

Tensor dense_forward(const Tensor& input, const LayerParams& params) {
  if (params.kind != LayerKind::dense) throw std::invalid_argument("dense_forward: layer is not dense");
  const std::size_t n = params.in_dim(), m = params.out_dim();
  if (input.size() != n) {
    throw std::invalid_argument("dense_forward: input shape " + shape_str(input.shape()) +
                                " incompatible with weights " + shape_str(params.weights.shape()));
  }
  Tensor out(Shape{m});
  const double* x = input.data();
  for (std::size_t o = 0; o < m; ++o) {
    const double* row = params.weights.data() + o * n;
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < n; ++i) acc += row[i] * x[i];
    out[o] = params.bias[o] + acc;
  }
  return out;
}

Tensor dense_backward(const Tensor& grad_out, const Tensor& cached_input, LayerParams& params) {
  if (cached_input.empty()) throw std::invalid_argument("dense_backward: missing forward cache");
  if (params.kind != LayerKind::dense) throw std::invalid_argument("dense_backward: layer is not dense");
  const std::size_t n = params.in_dim(), m = params.out_dim();
  if (cached_input.size() != n) {
    throw std::invalid_argument("dense_backward: cached input shape " + shape_str(cached_input.shape()) +
                                " incompatible with weights " + shape_str(params.weights.shape()));
  }
  require_shape(grad_out, Shape{m}, "dense_backward grad_out");

  Tensor grad_in(cached_input.shape());
  const double* x = cached_input.data();
  double* __restrict gi = grad_in.data();
  for (std::size_t o = 0; o < m; ++o) {
    const double go = grad_out[o];
    if (go == 0.0) continue;
    params.grad_bias[o] += go;
    const double* __restrict row = params.weights.data() + o * n;
    double* __restrict grow = params.grad_weights.data() + o * n;
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
      grow[i] += go * x[i];
      gi[i] += go * row[i];
    }
  }
  return grad_in;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  const double* in = input.data();
  double* o = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& cached_input) {
  if (cached_input.empty()) throw std::invalid_argument("relu_backward: missing forward cache");
  require_shape(grad_out, cached_input.shape(), "relu_backward grad_out");
  Tensor grad_in(cached_input.shape());
  const double* in = cached_input.data();
  const double* g = grad_out.data();
  double* gi = grad_in.data();
  for (std::size_t i = 0; i < cached_input.size(); ++i) gi[i] = in[i] > 0.0 ? g[i] : 0.0;
  return grad_in;
}

std::pair<Tensor, PoolIndices> maxpool2x2(const Tensor& input) {
  if (input.rank() != 3) throw std::invalid_argument("maxpool2x2: expected [C,H,W], got " + shape_str(input.shape()));
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("maxpool2x2: spatial dimensions must be even, got " + shape_str(input.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out(Shape{c, oh, ow});
  PoolIndices idx{input.shape(), std::vector<std::size_t>(c * oh * ow)};
  const double* in = input.data();
  std::size_t k = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++k) {
        const std::size_t base = (ch * h + 2 * oy) * w + 2 * ox;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int j = 1; j < 4; ++j) {
          if (in[cand[j]] > in[best]) best = cand[j];
        }
        out[k] = in[best];
        idx.argmax[k] = best;
      }
    }
  }
  return {std::move(out), std::move(idx)};
}

Tensor maxpool_backward(const Tensor& grad_out, const PoolIndices& indices) {
  if (indices.input_shape.empty()) throw std::invalid_argument("maxpool_backward: missing forward cache");
  if (grad_out.size() != indices.argmax.size()) {
    throw std::invalid_argument("maxpool_backward: grad_out shape " + shape_str(grad_out.shape()) +
                                " does not match pooled output of " + shape_str(indices.input_shape));
  }
  Tensor grad_in(indices.input_shape);
  for (std::size_t k = 0; k < indices.argmax.size(); ++k) grad_in[indices.argmax[k]] += grad_out[k];
  return grad_in;
}

}  // namespace gazebar
