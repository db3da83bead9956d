#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>

#include "gazebar/losses.hpp"
#include "gazebar/model.hpp"
#include "gazebar/rng.hpp"
#include "gazebar/shard.hpp"
#include "gazebar/synthdata.hpp"
#include "support.hpp"

using namespace gazebar;
using gazebar::testing::TempDir;

namespace {

Identity symmetric_identity() {
  Identity id;
  id.subject_id = 1;
  id.face_a = 12.0;
  id.face_b = 14.0;
  id.eye_spacing = 12.0;
  id.eye_size = 4.0;
  id.pupil_gain = 6.0;
  return id;
}

bool is_pupil(const Tensor& img, std::size_t i, std::size_t j) {
  return img.at(0, i, j) == kPupil[0] && img.at(1, i, j) == kPupil[1] && img.at(2, i, j) == kPupil[2];
}

// Pixel centers inside a disc, enumerated directly.
std::set<std::pair<int, int>> disc_pixels(double cx, double cy, double r) {
  std::set<std::pair<int, int>> out;
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 32; ++j) {
      const double dx = j + 0.5 - cx, dy = i + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) out.insert({i, j});
    }
  }
  return out;
}

// Sub-pixel pupil center: the mean of all candidate centers whose rasterized
// disc reproduces the observed mask, starting from the mask centroid.
std::array<double, 2> fit_disc(const Tensor& img, const std::vector<std::pair<int, int>>& mask) {
  double cx = 0.0, cy = 0.0;
  for (const auto& [i, j] : mask) {
    cx += j + 0.5;
    cy += i + 0.5;
  }
  cx /= static_cast<double>(mask.size());
  cy /= static_cast<double>(mask.size());
  const int i0 = static_cast<int>(cy), j0 = static_cast<int>(cx);
  double sx = 0.0, sy = 0.0;
  int hits = 0;
  for (int u = -25; u <= 25; ++u) {
    for (int v = -25; v <= 25; ++v) {
      const double x = cx + 0.02 * u, y = cy + 0.02 * v;
      bool ok = true;
      for (int i = std::max(0, i0 - 4); ok && i <= std::min(31, i0 + 4); ++i) {
        for (int j = std::max(0, j0 - 4); ok && j <= std::min(31, j0 + 4); ++j) {
          const double dx = j + 0.5 - x, dy = i + 0.5 - y;
          ok = (dx * dx + dy * dy <= kPupilRadius * kPupilRadius) == is_pupil(img, i, j);
        }
      }
      if (ok) {
        sx += x;
        sy += y;
        ++hits;
      }
    }
  }
  if (hits == 0) return {cx, cy};
  return {sx / hits, sy / hits};
}

// Pupil displacement from the eye centers measured in the image, averaged over
// both eyes, in eye-width units.
std::array<double, 2> pupil_features(const Identity& id, const Tensor& img) {
  std::vector<std::pair<int, int>> all;
  double mid = 0.0;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      if (is_pupil(img, i, j)) {
        all.push_back({i, j});
        mid += j + 0.5;
      }
  mid /= static_cast<double>(all.size());
  std::vector<std::pair<int, int>> left, right;
  for (const auto& p : all) (p.second + 0.5 < mid ? left : right).push_back(p);
  const auto l = fit_disc(img, left);
  const auto r = fit_disc(img, right);
  const double dx = ((l[0] - id.left_eye_x()) + (r[0] - id.right_eye_x())) / 2.0;
  const double dy = ((l[1] - kEyeCenterY) + (r[1] - kEyeCenterY)) / 2.0;
  return {dx / id.eye_size, dy / id.eye_size};
}

// Least squares y ~ a f0 + b f1 + c via 3x3 normal equations (Cramer).
std::array<double, 3> fit_linear(const std::vector<std::array<double, 2>>& f, const std::vector<double>& y) {
  double m[3][3] = {}, v[3] = {};
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double x[3] = {f[k][0], f[k][1], 1.0};
    for (int a = 0; a < 3; ++a) {
      v[a] += x[a] * y[k];
      for (int b = 0; b < 3; ++b) m[a][b] += x[a] * x[b];
    }
  }
  auto det = [](double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double d = det(m);
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    double t[3][3];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) t[a][b] = b == c ? v[a] : m[a][b];
    out[c] = det(t) / d;
  }
  return out;
}

}  // namespace

TEST(Render, ZeroGazePupilsAtEyeCenters) {
  const Identity id = symmetric_identity();
  const Tensor img = render(id, {0.0, 0.0});
  auto expect = disc_pixels(id.left_eye_x(), kEyeCenterY, kPupilRadius);
  const auto right = disc_pixels(id.right_eye_x(), kEyeCenterY, kPupilRadius);
  expect.insert(right.begin(), right.end());
  std::set<std::pair<int, int>> got;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      if (is_pupil(img, i, j)) got.insert({i, j});
  EXPECT_EQ(got, expect);
}

TEST(Render, MirrorSymmetricYaw) {
  const Identity id = symmetric_identity();
  for (double yaw : {0.1, 0.35, 0.8}) {
    const Tensor a = render(id, {0.2, yaw});
    const Tensor b = render(id, {0.2, -yaw});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t j = 0; j < 32; ++j) ASSERT_EQ(a.at(c, i, j), b.at(c, i, 31 - j)) << c << "," << i << "," << j;
  }
}

TEST(Render, PupilOffsetFollowsGain) {
  const Identity id = symmetric_identity();
  const GazeLabel g{0.2, 0.4};
  const auto off = pupil_offset(id, g);
  EXPECT_NEAR(off[0], 2.4, 1e-15);
  EXPECT_NEAR(off[1], -1.2, 1e-15);
  const Tensor img = render(id, g);
  // Left pupil center (10 + 2.4, 13 - 1.2) = (12.4, 11.8).
  const auto expect = disc_pixels(12.4, 11.8, kPupilRadius);
  std::set<std::pair<int, int>> got;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 16; ++j)
      if (is_pupil(img, i, j)) got.insert({i, j});
  EXPECT_EQ(got, expect);
  EXPECT_TRUE(got.count({11, 12}));
  EXPECT_FALSE(got.count({12, 9}));
}

TEST(Render, OnlyPupilsDependOnGaze) {
  Rng rng(1);
  const Identity id = draw_identity(5, rng);
  const Tensor a = render(id, {0.0, 0.0});
  const Tensor b = render(id, {-0.4, 0.7});
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j) {
      if (is_pupil(a, i, j) || is_pupil(b, i, j)) continue;
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a.at(c, i, j), b.at(c, i, j));
    }
}

TEST(Render, OutOfRangeGazeRejected) {
  const Identity id = symmetric_identity();
  EXPECT_THROW(render(id, {0.51, 0.0}), std::invalid_argument);
  EXPECT_THROW(render(id, {0.0, -0.81}), std::invalid_argument);
  EXPECT_THROW(render(id, {std::nan(""), 0.0}), std::invalid_argument);
  EXPECT_NO_THROW(render(id, {0.5, -0.8}));
}

TEST(Identity, DrawnIdentitiesFitFrame) {
  for (std::uint64_t s = 0; s < 500; ++s) {
    Rng rng = Rng::stream(9, "identity", s);
    const Identity id = draw_identity(s, rng);
    EXPECT_TRUE(id.fits_frame()) << "subject " << s;
    for (double c : id.face_color) {
      EXPECT_GE(c, 0.0);
      EXPECT_LE(c, 1.0);
    }
  }
  Identity wide = symmetric_identity();
  wide.eye_spacing = 28.0;
  EXPECT_FALSE(wide.fits_frame());
}

TEST(ApplyDomain, NeutralSpecIsIdentity) {
  DomainSpec spec;
  Rng gen(2);
  const Tensor img = render(draw_identity(1, gen), {0.1, -0.2});
  Rng rng(3);
  EXPECT_TRUE(apply_domain(img, spec, rng).bit_equal(img));
}

TEST(ApplyDomain, PureTintShiftsRed) {
  DomainSpec spec;
  spec.tint = {0.1, 0.0, 0.0};
  Tensor gray(Shape{3, 4, 4});
  for (double& v : gray.values()) v = 0.5;
  Rng rng(4);
  const Tensor out = apply_domain(gray, spec, rng);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(out[i], 0.6, 1e-15);
    EXPECT_EQ(out[16 + i], 0.5);
    EXPECT_EQ(out[32 + i], 0.5);
  }
}

TEST(ApplyDomain, SeededIsReproducibleAndInRange) {
  const DomainSpec spec = domain_preset("dim-tinted-noisy");
  Rng gen(5);
  const Tensor img = render(draw_identity(1, gen), {0.3, 0.3});
  Rng a(6), b(6);
  const Tensor x = apply_domain(img, spec, a);
  EXPECT_TRUE(x.bit_equal(apply_domain(img, spec, b)));
  for (double p : x.values()) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(DomainSpec, PresetsAndJson) {
  EXPECT_EQ(domain_preset("bright-clean").domain_id, 0u);
  EXPECT_EQ(domain_preset("dim-tinted-noisy").domain_id, 1u);
  EXPECT_THROW(domain_preset("foggy"), std::invalid_argument);
  const DomainSpec s = domain_preset("dim-tinted-noisy");
  const DomainSpec r = DomainSpec::from_json(s.to_json());
  EXPECT_EQ(r.to_json(), s.to_json());
  EXPECT_THROW(DomainSpec::from_json({{"domain_id", 3}, {"blur", 1.0}}), std::invalid_argument);
  EXPECT_THROW(DomainSpec::from_json({{"domain_id", 3}, {"noise_std", -1.0}}), std::invalid_argument);
}

TEST(SubjectIds, NamespacesAreDisjoint) {
  EXPECT_EQ(make_subject_id(1, 2, 3), (1ULL << 48) | (2ULL << 16) | 3ULL);
  GenerateOptions a{10, 4, 2, domain_preset("bright-clean")};
  GenerateOptions b{11, 4, 2, domain_preset("bright-clean")};
  GenerateOptions c{10, 4, 2, domain_preset("dim-tinted-noisy")};
  std::set<std::uint64_t> seen;
  for (const auto& opt : {a, b, c}) {
    const Dataset d = generate(opt);
    const std::set<std::uint64_t> ids(d.subject_ids.begin(), d.subject_ids.end());
    EXPECT_EQ(ids.size(), 4u);
    for (auto id : ids) EXPECT_TRUE(seen.insert(id).second);
  }
  EXPECT_THROW(make_subject_id(0, 0, 1u << 16), std::invalid_argument);
}

TEST(Generate, SingleSampleRoundTrip) {
  TempDir dir("synth");
  const Dataset d = generate({3, 1, 1, domain_preset("bright-clean")});
  ASSERT_EQ(d.size(), 1u);
  save_dataset(d, dir / "one.gbd");
  const Dataset r = load_dataset(dir / "one.gbd");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r.images[0].bit_equal(d.images[0]));
  EXPECT_EQ(r.labels[0], d.labels[0]);
  EXPECT_EQ(r.subject_ids[0], d.subject_ids[0]);
  EXPECT_EQ(r.manifest, d.manifest);
  EXPECT_EQ(r.manifest.at("n_samples"), 1);
}

TEST(Generate, SameSeedSameBytes) {
  const GenerateOptions opt{42, 3, 5, domain_preset("dim-tinted-noisy")};
  EXPECT_EQ(encode_dataset(generate(opt)), encode_dataset(generate(opt)));
  GenerateOptions other = opt;
  other.seed = 43;
  EXPECT_NE(encode_dataset(generate(opt)), encode_dataset(generate(other)));
}

TEST(Generate, SubjectMajorOrderAndRanges) {
  const Dataset d = generate({7, 3, 4, domain_preset("bright-clean")});
  ASSERT_EQ(d.size(), 12u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.subject_ids[i], make_subject_id(0, 7, i / 4));
    EXPECT_LE(std::abs(d.labels[i].pitch), kPitchLimit);
    EXPECT_LE(std::abs(d.labels[i].yaw), kYawLimit);
  }
  EXPECT_THROW(generate({7, 0, 4, domain_preset("bright-clean")}), std::invalid_argument);
}

TEST(Generate, LabelHistogramIsUniform) {
  const Dataset d = generate({11, 100, 100, domain_preset("bright-clean")});
  ASSERT_EQ(d.size(), 10000u);
  // 10 bins: chi-square critical value for df 9 at p = 0.001 is 27.877.
  for (int axis = 0; axis < 2; ++axis) {
    const double lim = axis == 0 ? kPitchLimit : kYawLimit;
    std::array<double, 10> counts{};
    for (const auto& g : d.labels) {
      const double v = axis == 0 ? g.pitch : g.yaw;
      counts[std::min<std::size_t>(9, static_cast<std::size_t>((v + lim) / (2 * lim) * 10))] += 1;
    }
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    EXPECT_LT(chi2, 27.877) << (axis == 0 ? "pitch" : "yaw");
  }
}

TEST(Generate, GazeIsLinearlyRecoverableFromPupils) {
  auto collect = [](std::uint64_t seed, std::size_t n_subjects, std::vector<std::array<double, 2>>& f,
                    std::vector<GazeLabel>& y) {
    for (std::size_t s = 0; s < n_subjects; ++s) {
      Rng id_rng = Rng::stream(seed, "identity", s);
      const Identity id = draw_identity(s, id_rng);
      Rng rng = Rng::stream(seed, "sample", s);
      for (int k = 0; k < 50; ++k) {
        const GazeLabel g{rng.uniform(-kPitchLimit, kPitchLimit), rng.uniform(-kYawLimit, kYawLimit)};
        f.push_back(pupil_features(id, render(id, g)));
        y.push_back(g);
      }
    }
  };
  std::vector<std::array<double, 2>> f_train, f_test;
  std::vector<GazeLabel> y_train, y_test;
  collect(1, 20, f_train, y_train);
  collect(2, 20, f_test, y_test);
  std::vector<double> pitch, yaw;
  for (const auto& g : y_train) {
    pitch.push_back(g.pitch);
    yaw.push_back(g.yaw);
  }
  const auto wp = fit_linear(f_train, pitch);
  const auto wy = fit_linear(f_train, yaw);
  double err = 0.0;
  for (std::size_t k = 0; k < f_test.size(); ++k) {
    const GazeLabel hat{wp[0] * f_test[k][0] + wp[1] * f_test[k][1] + wp[2],
                        wy[0] * f_test[k][0] + wy[1] * f_test[k][1] + wy[2]};
    err += angular_error_deg(y_test[k], hat);
  }
  err /= static_cast<double>(f_test.size());
  std::cout << "linear pupil regression mean error: " << err << " deg\n";
  EXPECT_LT(err, 1.0);
}

TEST(Shard, CorruptionIsDetected) {
  const std::vector<std::uint8_t> good = encode_dataset(generate({1, 2, 2, domain_preset("bright-clean")}));
  auto expect_code = [](std::vector<std::uint8_t> bytes, FormatErrc code) {
    try {
      decode_dataset(std::move(bytes));
      ADD_FAILURE() << "no error for " << to_string(code);
    } catch (const FormatError& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  expect_code(bad_magic, FormatErrc::bad_magic);
  auto bad_version = good;
  bad_version[4] = 9;
  expect_code(bad_version, FormatErrc::bad_version);
  expect_code(std::vector<std::uint8_t>(good.begin(), good.end() - 1), FormatErrc::truncated);
  expect_code(std::vector<std::uint8_t>(good.begin(), good.begin() + 10), FormatErrc::truncated);
  auto trailing = good;
  trailing.push_back(0);
  expect_code(trailing, FormatErrc::trailing_data);
  auto count = good;
  count[8] = 3;  // N no longer matches the manifest or the blob
  EXPECT_THROW(decode_dataset(count), FormatError);
}

TEST(Shard, HeaderLayout) {
  const Dataset d = generate({1, 1, 2, domain_preset("bright-clean")});
  const auto bytes = encode_dataset(d);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GBD1");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);  // N, little-endian
  EXPECT_EQ(bytes[16], 3);
  EXPECT_EQ(bytes[20], 32);
  EXPECT_EQ(bytes[24], 32);
  std::uint64_t mlen = 0;
  for (int b = 0; b < 8; ++b) mlen |= static_cast<std::uint64_t>(bytes[28 + b]) << (8 * b);
  EXPECT_EQ(bytes.size(), 36 + mlen + 8 * (2 * 3 * 32 * 32) + 8 * 4 + 8 * 2);
}

TEST(Shard, MissingFileIsIoError) {
  try {
    load_dataset("/nonexistent/dir/x.gbd");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatErrc::io);
  }
}

TEST(Shard, InvalidDatasetRejectedOnSave) {
  Dataset d = generate({1, 1, 2, domain_preset("bright-clean")});
  d.labels.pop_back();
  EXPECT_THROW(d.validate(), std::invalid_argument);
}
