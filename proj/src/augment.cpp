#include "gazebar/augment.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "gazebar/rng.hpp"

namespace gazebar {

void AugmentConfig::validate() const {
  const std::pair<const char*, FactorRange> ranges[] = {
      {"brightness", brightness}, {"contrast", contrast}, {"saturation", saturation}};
  for (const auto& [name, r] : ranges) {
    if (!(r.lo > 0.0) || !(r.lo <= r.hi)) throw std::invalid_argument(std::string(name) + " range must satisfy 0 < lo <= hi");
    if (!(r.lo <= 1.0 && 1.0 <= r.hi)) throw std::invalid_argument(std::string(name) + " range must contain 1.0");
  }
}

AugmentFactors draw_factors(const AugmentConfig& cfg, Rng& rng) {
  AugmentFactors f;
  f.brightness = rng.uniform(cfg.brightness.lo, cfg.brightness.hi);
  f.contrast = rng.uniform(cfg.contrast.lo, cfg.contrast.hi);
  f.saturation = rng.uniform(cfg.saturation.lo, cfg.saturation.hi);
  return f;
}

namespace {

void require_rgb(const Tensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw std::invalid_argument(std::string(what) + ": expected [3,H,W] image, got " + shape_str(image.shape()));
  }
}

}  // namespace

void adjust_brightness(Tensor& image, double factor) {
  for (double& p : image.values()) p *= factor;
}

void adjust_contrast(Tensor& image, double factor) {
  if (factor == 1.0) return;
  const double mu = image.sum() / static_cast<double>(image.size());
  for (double& p : image.values()) p = mu + (p - mu) * factor;
}

void adjust_saturation(Tensor& image, double factor) {
  require_rgb(image, "adjust_saturation");
  if (factor == 1.0) return;
  const std::size_t plane = image.dim(1) * image.dim(2);
  double* r = image.data();
  double* g = r + plane;
  double* b = g + plane;
  for (std::size_t i = 0; i < plane; ++i) {
    // 0.299 R + 0.587 G + 0.114 B, arranged so that R == G == B gives R exactly
    const double lum = r[i] + 0.587 * (g[i] - r[i]) + 0.114 * (b[i] - r[i]);
    r[i] = lum + (r[i] - lum) * factor;
    g[i] = lum + (g[i] - lum) * factor;
    b[i] = lum + (b[i] - lum) * factor;
  }
}

void clamp_unit(Tensor& image) {
  for (double& p : image.values()) p = std::clamp(p, 0.0, 1.0);
}

void require_unit_range(const Tensor& image, const char* what) {
  for (double p : image.values()) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + ": pixel values must lie in [0,1]");
  }
}

Tensor apply_factors(const Tensor& image, const AugmentFactors& factors) {
  require_rgb(image, "apply_factors");
  Tensor out = image;
  adjust_brightness(out, factors.brightness);
  adjust_contrast(out, factors.contrast);
  adjust_saturation(out, factors.saturation);
  clamp_unit(out);
  return out;
}

Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  require_unit_range(image, "augment");
  return apply_factors(image, draw_factors(cfg, rng));
}

}  // namespace gazebar
