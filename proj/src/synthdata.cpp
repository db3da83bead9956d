#include "gazebar/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gazebar/augment.hpp"
#include "gazebar/model.hpp"
#include "gazebar/rng.hpp"
#include "gazebar/shard.hpp"

namespace gazebar {

namespace {

struct Ellipse {
  double cx, cy, a, b;

  bool contains(double x, double y) const noexcept {
    const double u = (x - cx) / a;
    const double v = (y - cy) / b;
    return u * u + v * v <= 1.0;
  }
};

void paint(Tensor& img, const Ellipse& e, const Rgb& color) {
  const std::size_t n = kImageSize;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = static_cast<double>(i) + 0.5;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = static_cast<double>(j) + 0.5;
      if (!e.contains(x, y)) continue;
      for (std::size_t c = 0; c < 3; ++c) img.at(c, i, j) = color[c];
    }
  }
}

bool inside_frame(double lo_x, double hi_x, double lo_y, double hi_y) {
  const double size = static_cast<double>(kImageSize);
  return lo_x >= 0.0 && hi_x <= size && lo_y >= 0.0 && hi_y <= size;
}

}  // namespace

bool Identity::fits_frame() const noexcept {
  const double eye_h = kEyeAspect * eye_size;
  const double reach_x = pupil_gain * kYawLimit + kPupilRadius;
  const double reach_y = pupil_gain * kPitchLimit + kPupilRadius;
  for (double cx : {left_eye_x(), right_eye_x()}) {
    if (!inside_frame(cx - eye_size, cx + eye_size, kEyeCenterY - eye_h, kEyeCenterY + eye_h)) return false;
    if (!inside_frame(cx - reach_x, cx + reach_x, kEyeCenterY - reach_y, kEyeCenterY + reach_y)) return false;
  }
  return true;
}

void DomainSpec::validate() const {
  if (!(brightness_mean > 0.0) || !(contrast_mean > 0.0)) throw std::invalid_argument("domain factor means must be positive");
  if (!(brightness_std >= 0.0) || !(contrast_std >= 0.0) || !(noise_std >= 0.0)) {
    throw std::invalid_argument("domain standard deviations must be non-negative");
  }
  for (double t : tint) {
    if (!(t > -1.0 && t < 1.0)) throw std::invalid_argument("domain tint components must lie in (-1, 1)");
  }
}

nlohmann::json DomainSpec::to_json() const {
  return {{"domain_id", domain_id},
          {"name", name},
          {"brightness_mean", brightness_mean},
          {"brightness_std", brightness_std},
          {"contrast_mean", contrast_mean},
          {"contrast_std", contrast_std},
          {"tint", tint},
          {"noise_std", noise_std}};
}

DomainSpec DomainSpec::from_json(const nlohmann::json& j) {
  static const char* const known[] = {"domain_id",    "name",         "brightness_mean", "brightness_std",
                                      "contrast_mean", "contrast_std", "tint",            "noise_std"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw std::invalid_argument("unknown domain field '" + key + "'");
    }
  }
  DomainSpec s;
  s.domain_id = j.at("domain_id").get<std::uint32_t>();
  s.name = j.value("name", std::string("custom"));
  s.brightness_mean = j.value("brightness_mean", 1.0);
  s.brightness_std = j.value("brightness_std", 0.0);
  s.contrast_mean = j.value("contrast_mean", 1.0);
  s.contrast_std = j.value("contrast_std", 0.0);
  if (j.contains("tint")) s.tint = j.at("tint").get<Rgb>();
  s.noise_std = j.value("noise_std", 0.0);
  s.validate();
  return s;
}

DomainSpec domain_preset(std::string_view name) {
  DomainSpec s;
  if (name == "bright-clean") {
    s.domain_id = 0;
    s.brightness_mean = 1.1;
    s.brightness_std = 0.05;
    s.contrast_mean = 1.1;
    s.contrast_std = 0.05;
    s.tint = {0.0, 0.0, 0.0};
    s.noise_std = 0.01;
  } else if (name == "dim-tinted-noisy") {
    s.domain_id = 1;
    s.brightness_mean = 0.6;
    s.brightness_std = 0.08;
    s.contrast_mean = 0.75;
    s.contrast_std = 0.08;
    s.tint = {0.06, 0.02, -0.04};
    s.noise_std = 0.03;
  } else {
    throw std::invalid_argument("unknown domain preset '" + std::string(name) + "'");
  }
  s.name = std::string(name);
  return s;
}

std::vector<std::string> domain_preset_names() { return {"bright-clean", "dim-tinted-noisy"}; }

Identity draw_identity(std::uint64_t subject_id, Rng& rng) {
  Identity id;
  id.subject_id = subject_id;
  constexpr Rgb dark{0.36, 0.24, 0.17};
  constexpr Rgb light{0.96, 0.82, 0.72};
  const double tone = rng.uniform();
  for (std::size_t c = 0; c < 3; ++c) {
    id.face_color[c] = std::clamp(dark[c] + tone * (light[c] - dark[c]) + rng.uniform(-0.04, 0.04), 0.0, 1.0);
  }
  id.face_a = rng.uniform(11.5, 14.0);
  id.face_b = rng.uniform(13.0, 15.0);
  id.eye_spacing = rng.uniform(11.0, 14.0);
  id.eye_size = rng.uniform(3.5, 5.0);
  id.pupil_gain = 1.5 * id.eye_size;
  return id;
}

std::array<double, 2> pupil_offset(const Identity& identity, const GazeLabel& gaze) noexcept {
  return {identity.pupil_gain * gaze.yaw, -identity.pupil_gain * gaze.pitch};
}

Tensor render(const Identity& identity, const GazeLabel& gaze) {
  if (!(std::abs(gaze.pitch) <= kPitchLimit) || !(std::abs(gaze.yaw) <= kYawLimit)) {
    throw std::invalid_argument("render: gaze outside label range");
  }
  Tensor img(Shape{kImageChannels, kImageSize, kImageSize});
  for (std::size_t c = 0; c < 3; ++c) {
    std::fill(img.data() + c * kImageSize * kImageSize, img.data() + (c + 1) * kImageSize * kImageSize, kBackground[c]);
  }
  paint(img, Ellipse{kFaceCenterX, kFaceCenterY, identity.face_a, identity.face_b}, identity.face_color);
  const auto offset = pupil_offset(identity, gaze);
  for (double cx : {identity.left_eye_x(), identity.right_eye_x()}) {
    paint(img, Ellipse{cx, kEyeCenterY, identity.eye_size, kEyeAspect * identity.eye_size}, kEyeWhite);
  }
  for (double cx : {identity.left_eye_x(), identity.right_eye_x()}) {
    paint(img, Ellipse{cx + offset[0], kEyeCenterY + offset[1], kPupilRadius, kPupilRadius}, kPupil);
  }
  return img;
}

Tensor apply_domain(const Tensor& image, const DomainSpec& spec, Rng& rng) {
  const double fb = std::clamp(rng.normal(spec.brightness_mean, spec.brightness_std), 0.1, 3.0);
  const double fc = std::clamp(rng.normal(spec.contrast_mean, spec.contrast_std), 0.1, 3.0);
  Tensor out = image;
  adjust_brightness(out, fb);
  adjust_contrast(out, fc);
  const std::size_t plane = out.size() / 3;
  for (std::size_t c = 0; c < 3; ++c) {
    double* p = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += spec.tint[c] + spec.noise_std * rng.normal();
  }
  clamp_unit(out);
  return out;
}

std::uint64_t make_subject_id(std::uint32_t domain_id, std::uint64_t seed, std::size_t index) {
  if (index >= (1u << 16)) throw std::invalid_argument("at most 65536 subjects per shard");
  if (domain_id >= (1u << 16)) throw std::invalid_argument("domain_id must be below 65536");
  return (static_cast<std::uint64_t>(domain_id) << 48) | ((seed & 0xffffffffULL) << 16) |
         static_cast<std::uint64_t>(index);
}

Dataset generate(const GenerateOptions& options) {
  if (options.n_subjects < 1) throw std::invalid_argument("generate: need at least one subject");
  if (options.samples_per_subject < 1) throw std::invalid_argument("generate: need at least one sample per subject");
  options.domain.validate();

  Dataset data;
  const std::size_t n = options.n_subjects * options.samples_per_subject;
  data.images.reserve(n);
  data.labels.reserve(n);
  data.subject_ids.reserve(n);
  nlohmann::json subjects = nlohmann::json::array();
  for (std::size_t s = 0; s < options.n_subjects; ++s) {
    Rng id_rng = Rng::stream(options.seed, "identity", s);
    const Identity identity = draw_identity(make_subject_id(options.domain.domain_id, options.seed, s), id_rng);
    subjects.push_back({{"subject_id", identity.subject_id},
                        {"face_color", identity.face_color},
                        {"face_axes", {identity.face_a, identity.face_b}},
                        {"eye_spacing", identity.eye_spacing},
                        {"eye_size", identity.eye_size},
                        {"pupil_gain", identity.pupil_gain}});
    for (std::size_t j = 0; j < options.samples_per_subject; ++j) {
      Rng rng = Rng::stream(options.seed, "sample", s * options.samples_per_subject + j);
      GazeLabel g;
      g.pitch = rng.uniform(-kPitchLimit, kPitchLimit);
      g.yaw = rng.uniform(-kYawLimit, kYawLimit);
      data.images.push_back(apply_domain(render(identity, g), options.domain, rng));
      data.labels.push_back(g);
      data.subject_ids.push_back(identity.subject_id);
    }
  }
  data.manifest = {{"format", "GBD1"},
                   {"generator_seed", options.seed},
                   {"n_samples", n},
                   {"n_subjects", options.n_subjects},
                   {"samples_per_subject", options.samples_per_subject},
                   {"image_shape", {kImageChannels, kImageSize, kImageSize}},
                   {"label_ranges", {{"pitch", {-kPitchLimit, kPitchLimit}}, {"yaw", {-kYawLimit, kYawLimit}}}},
                   {"domains", nlohmann::json::array({options.domain.to_json()})},
                   {"subjects", subjects}};
  return data;
}

}  // namespace gazebar
