#pragma once

#include "gazebar/tensor.hpp"

namespace gazebar {

class Rng;

struct FactorRange {
  double lo = 0.6;
  double hi = 1.4;
};

/// Photometric jitter. Factors are drawn uniformly from each range and applied
/// in the fixed order brightness, contrast, saturation, then clamped to [0,1].
struct AugmentConfig {
  FactorRange brightness;
  FactorRange contrast;
  FactorRange saturation;

  /// 0 < lo <= hi and 1.0 within every range.
  void validate() const;
};

struct AugmentFactors {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
};

/// Draws brightness, contrast, saturation in that order.
AugmentFactors draw_factors(const AugmentConfig& cfg, Rng& rng);

// In-place steps on a [3,H,W] image, no clamping.
// p' = f p
void adjust_brightness(Tensor& image, double factor);
// p' = mu + (p - mu) f, mu the mean over all pixels and channels; f == 1 is a no-op
void adjust_contrast(Tensor& image, double factor);
// p' = l + (p - l) f, l = 0.299 R + 0.587 G + 0.114 B per pixel
void adjust_saturation(Tensor& image, double factor);
void clamp_unit(Tensor& image);

/// Brightness, contrast, saturation, clamp. Factors of exactly 1 leave the
/// image bit-identical.
Tensor apply_factors(const Tensor& image, const AugmentFactors& factors);

/// Rejects images outside [0,1] and invalid configs.
Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng);

void require_unit_range(const Tensor& image, const char* what);

}  // namespace gazebar
