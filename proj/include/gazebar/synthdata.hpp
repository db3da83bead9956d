#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazebar/gaze.hpp"
#include "gazebar/tensor.hpp"

namespace gazebar {

class Rng;
struct Dataset;

using Rgb = std::array<double, 3>;

// Label ranges of generated data, radians.
inline constexpr double kPitchLimit = 0.5;
inline constexpr double kYawLimit = 0.8;

// Fixed scene layout in pixel coordinates; pixel (row i, col j) has its
// center at (j + 0.5, i + 0.5).
inline constexpr double kFaceCenterX = 16.0;
inline constexpr double kFaceCenterY = 17.0;
inline constexpr double kEyeCenterY = 13.0;
inline constexpr double kEyeAspect = 0.6;  // eye semi-height / semi-width
inline constexpr double kPupilRadius = 1.75;
inline constexpr Rgb kBackground = {0.30, 0.32, 0.36};
inline constexpr Rgb kEyeWhite = {0.95, 0.95, 0.95};
inline constexpr Rgb kPupil = {0.05, 0.04, 0.08};

/// Per-subject appearance. Only the pupils depend on gaze.
struct Identity {
  std::uint64_t subject_id = 0;
  Rgb face_color{0.8, 0.6, 0.5};
  double face_a = 13.0;  // horizontal semi-axis
  double face_b = 14.0;  // vertical semi-axis
  double eye_spacing = 12.0;  // distance between eye centers
  double eye_size = 4.0;      // eye semi-width
  double pupil_gain = 6.0;    // pixels of pupil travel per radian

  double left_eye_x() const noexcept { return kFaceCenterX - eye_spacing / 2.0; }
  double right_eye_x() const noexcept { return kFaceCenterX + eye_spacing / 2.0; }
  /// Both eye ellipses, and both pupils for every in-range gaze, lie inside the frame.
  bool fits_frame() const noexcept;
};

/// Photometric signature of a domain.
struct DomainSpec {
  std::uint32_t domain_id = 0;
  std::string name;
  double brightness_mean = 1.0;
  double brightness_std = 0.0;
  double contrast_mean = 1.0;
  double contrast_std = 0.0;
  Rgb tint{0.0, 0.0, 0.0};
  double noise_std = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static DomainSpec from_json(const nlohmann::json& j);
};

/// "bright-clean" (id 0) or "dim-tinted-noisy" (id 1).
DomainSpec domain_preset(std::string_view name);
std::vector<std::string> domain_preset_names();

Identity draw_identity(std::uint64_t subject_id, Rng& rng);

/// Gaze-dependent rendering of one identity; rejects out-of-range gaze.
Tensor render(const Identity& identity, const GazeLabel& gaze);

/// Pupil center offset from its eye center, (gain yaw, -gain pitch) pixels.
std::array<double, 2> pupil_offset(const Identity& identity, const GazeLabel& gaze) noexcept;

/// Samples brightness and contrast factors from the domain's Gaussians (clamped to
/// [0.1, 3]), applies them with the augmentation formulas, then adds the tint
/// and per-pixel Gaussian noise and clamps to [0,1].
Tensor apply_domain(const Tensor& image, const DomainSpec& spec, Rng& rng);

/// subject_id = domain_id << 48 | (seed & 0xffffffff) << 16 | subject index
std::uint64_t make_subject_id(std::uint32_t domain_id, std::uint64_t seed, std::size_t index);

struct GenerateOptions {
  std::uint64_t seed = 0;
  std::size_t n_subjects = 1;
  std::size_t samples_per_subject = 1;
  DomainSpec domain;
};

/// Identities and gazes come from per-index streams of `seed`; samples are
/// ordered subject-major.
Dataset generate(const GenerateOptions& options);

}  // namespace gazebar
