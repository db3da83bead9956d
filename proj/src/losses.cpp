#include "gazebar/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gazebar {

void LossWeights::validate() const {
  if (!(lambda_a >= 0.0) || !(lambda_m >= 0.0) || !(lambda_c >= 0.0)) {
    throw std::invalid_argument("loss weights must be finite and non-negative");
  }
}

double angular_error_deg(const GazeLabel& g, const GazeLabel& g_hat) {
  const auto a = gaze_to_vec(g);
  const auto b = gaze_to_vec(g_hat);
  const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  double cosine = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
  cosine = std::clamp(cosine, -1.0, 1.0);
  return std::acos(cosine) * 180.0 / std::numbers::pi;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double squared_distance(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

void require_gaze_batch(std::span<const Tensor> a, std::span<const Tensor> b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": batch size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != 2 || b[i].size() != 2) throw std::invalid_argument(std::string(what) + ": gaze tensors must have 2 elements");
  }
}

}  // namespace

double l1_gaze(std::span<const Tensor> target, std::span<const Tensor> pred, std::vector<Tensor>* grad_pred) {
  require_gaze_batch(target, pred, "l1_gaze");
  if (target.empty()) return 0.0;
  const double scale = 1.0 / (2.0 * static_cast<double>(target.size()));
  double sum = 0.0;
  if (grad_pred) grad_pred->assign(pred.size(), Tensor(Shape{2}));
  for (std::size_t i = 0; i < target.size(); ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double diff = pred[i][c] - target[i][c];
      sum += std::abs(diff);
      if (grad_pred) (*grad_pred)[i][c] = sign(diff) * scale;
    }
  }
  return sum * scale;
}

double mmd(std::span<const Tensor> x, std::span<const Tensor> y, double sigma, std::vector<Tensor>* grad_x,
           std::vector<Tensor>* grad_y) {
  if (x.empty() || y.empty()) throw std::invalid_argument("mmd: empty batch");
  if (x.size() != y.size()) {
    throw std::invalid_argument("mmd: batch sizes differ (" + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("mmd: sigma must be positive");
  const std::size_t n = x.size();
  const std::size_t dim = x[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i].size() != dim || y[i].size() != dim) throw std::invalid_argument("mmd: feature dimensions differ");
  }

  const double inv_two_s2 = 1.0 / (2.0 * sigma * sigma);
  auto kernel = [&](const Tensor& a, const Tensor& b) { return std::exp(-squared_distance(a, b) * inv_two_s2); };

  std::vector<double> kxx(n * n), kyy(n * n), kxy(n * n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      kxx[i * n + j] = kernel(x[i], x[j]);
      kyy[i * n + j] = kernel(y[i], y[j]);
      kxy[i * n + j] = kernel(x[i], y[j]);
      sxx += kxx[i * n + j];
      syy += kyy[i * n + j];
      sxy += kxy[i * n + j];
    }
  }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double raw = (sxx + syy - 2.0 * sxy) / nn;
  const bool clamped = raw < 0.0;

  if (grad_x || grad_y) {
    // d k(a,b) / da = -k(a,b) (a - b) / sigma^2
    const double coef = clamped ? 0.0 : 2.0 / (nn * sigma * sigma);
    if (grad_x) {
      grad_x->assign(n, Tensor(Shape{dim}));
      for (std::size_t i = 0; i < n; ++i) {
        Tensor& g = (*grad_x)[i];
        for (std::size_t j = 0; j < n; ++j) {
          const double a = kxx[i * n + j], b = kxy[i * n + j];
          for (std::size_t d = 0; d < dim; ++d) {
            g[d] += -a * (x[i][d] - x[j][d]) + b * (x[i][d] - y[j][d]);
          }
        }
        for (std::size_t d = 0; d < dim; ++d) g[d] *= coef;
      }
    }
    if (grad_y) {
      grad_y->assign(n, Tensor(Shape{dim}));
      for (std::size_t j = 0; j < n; ++j) {
        Tensor& g = (*grad_y)[j];
        for (std::size_t l = 0; l < n; ++l) {
          const double a = kyy[j * n + l], b = kxy[l * n + j];
          for (std::size_t d = 0; d < dim; ++d) {
            g[d] += -a * (y[j][d] - y[l][d]) + b * (y[j][d] - x[l][d]);
          }
        }
        for (std::size_t d = 0; d < dim; ++d) g[d] *= coef;
      }
    }
  }
  return clamped ? 0.0 : raw;
}

double median_bandwidth(std::span<const Tensor> x, std::span<const Tensor> y) {
  std::vector<const Tensor*> pts;
  for (const auto& t : x) pts.push_back(&t);
  for (const auto& t : y) pts.push_back(&t);
  std::vector<double> dists;
  dists.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) dists.push_back(std::sqrt(squared_distance(*pts[i], *pts[j])));
  }
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  const double median = m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  return median > 0.0 ? median : 1.0;
}

double contrast_loss(std::span<const ContrastPair> pairs, std::vector<Tensor>* grad_con, std::vector<Tensor>* grad_ori) {
  if (grad_con) grad_con->assign(pairs.size(), Tensor(Shape{2}));
  if (grad_ori) grad_ori->assign(pairs.size(), Tensor(Shape{2}));
  if (pairs.empty()) return 0.0;
  const double scale = 1.0 / (2.0 * static_cast<double>(pairs.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ContrastPair& p = pairs[i];
    if (p.pred_con->size() != 2 || p.pred_ori->size() != 2) {
      throw std::invalid_argument("contrast_loss: gaze tensors must have 2 elements");
    }
    const double label_delta[2] = {p.label_con.pitch - p.label_ori.pitch, p.label_con.yaw - p.label_ori.yaw};
    for (std::size_t c = 0; c < 2; ++c) {
      const double r = ((*p.pred_con)[c] - (*p.pred_ori)[c]) - label_delta[c];
      sum += std::abs(r);
      const double g = sign(r) * scale;
      if (grad_con) (*grad_con)[i][c] = g;
      if (grad_ori) (*grad_ori)[i][c] = -g;
    }
  }
  return sum * scale;
}

LossReport total_loss(LossReport c, const LossWeights& weights) {
  const std::pair<const char*, double> parts[] = {
      {"l_ori", c.l_ori}, {"l_aug", c.l_aug}, {"l_mmd", c.l_mmd}, {"l_con", c.l_con}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) throw std::runtime_error(std::string("non-finite loss component ") + name);
  }
  c.l_total = c.l_ori + weights.lambda_a * c.l_aug + weights.lambda_m * c.l_mmd + weights.lambda_c * c.l_con;
  return c;
}

}  // namespace gazebar
