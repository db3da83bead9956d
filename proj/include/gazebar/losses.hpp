#pragma once

#include <span>
#include <vector>

#include "gazebar/gaze.hpp"
#include "gazebar/tensor.hpp"

namespace gazebar {

struct LossWeights {
  double lambda_a = 1.0;  // augmentation L1
  double lambda_m = 1.0;  // feature MMD
  double lambda_c = 1.0;  // contrast

  void validate() const;
};

struct LossReport {
  double l_ori = 0.0;
  double l_aug = 0.0;
  double l_mmd = 0.0;
  double l_con = 0.0;
  double l_total = 0.0;
};

/// Angle between the unit vectors of two labels, in degrees, within [0, 180].
double angular_error_deg(const GazeLabel& g, const GazeLabel& g_hat);

/// Mean absolute per-component error over a batch of [2] gaze tensors:
/// sum_i (|dpitch_i| + |dyaw_i|) / (2 N). When `grad_pred` is given it
/// receives d loss / d pred per sample (sign(pred - target) / 2N, 0 at a tie).
double l1_gaze(std::span<const Tensor> target, std::span<const Tensor> pred, std::vector<Tensor>* grad_pred = nullptr);

/// Biased squared-MMD estimate with Gaussian kernel
///   k(a, b) = exp(-|a - b|^2 / (2 sigma^2))
///   mmd = mean k(x, x') + mean k(y, y') - 2 mean k(x, y), clamped at 0.
/// Gradients (optional) treat sigma as a constant.
double mmd(std::span<const Tensor> x, std::span<const Tensor> y, double sigma, std::vector<Tensor>* grad_x = nullptr,
           std::vector<Tensor>* grad_y = nullptr);

/// Median pairwise Euclidean distance over the concatenation of x and y;
/// 1.0 when the median is 0 or there is only one point.
double median_bandwidth(std::span<const Tensor> x, std::span<const Tensor> y);

/// One anchor/positive pair for the contrast term.
struct ContrastPair {
  const Tensor* pred_con = nullptr;  // network output on the positive
  const Tensor* pred_ori = nullptr;  // network output on the anchor
  GazeLabel label_con;
  GazeLabel label_ori;
};

/// Mean absolute value of (pred_con - pred_ori) - (label_con - label_ori) over
/// components and pairs. Gradients flow into both predictions; labels are
/// constants. Returns 0 for an empty batch.
double contrast_loss(std::span<const ContrastPair> pairs, std::vector<Tensor>* grad_con = nullptr,
                     std::vector<Tensor>* grad_ori = nullptr);

/// Fills report.l_total = l_ori + la l_aug + lm l_mmd + lc l_con.
/// Throws std::runtime_error naming the first non-finite component.
LossReport total_loss(LossReport components, const LossWeights& weights);

}  // namespace gazebar
