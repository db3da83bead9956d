#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "gazebar/adam.hpp"
#include "gazebar/gradcheck.hpp"
#include "gazebar/layers.hpp"
#include "gazebar/rng.hpp"
#include "support.hpp"

using namespace gazebar;
using gazebar::testing::random_tensor;

namespace {

// Direct 6-nested-loop convolution, zero padding 1.
Tensor reference_conv(const Tensor& in, const LayerParams& p) {
  const std::size_t cin = in.dim(0), h = in.dim(1), w = in.dim(2), cout = p.out_dim();
  Tensor out(Shape{cout, h, w});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double s = p.bias[co];
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const long yy = static_cast<long>(y) + ky - 1, xx = static_cast<long>(x) + kx - 1;
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
              s += p.weights[((co * cin + ci) * 3 + ky) * 3 + kx] * in.at(ci, yy, xx);
            }
        out.at(co, y, x) = s;
      }
  return out;
}

LayerParams random_conv(Rng& rng, std::size_t cin, std::size_t cout) {
  LayerParams p = LayerParams::conv2d(cin, cout);
  p.weights = random_tensor(rng, p.weights.shape());
  p.bias = random_tensor(rng, p.bias.shape());
  return p;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Central difference of f with respect to t[i].
double numeric_partial(Tensor& t, std::size_t i, const std::function<double()>& f, double h = 1e-5) {
  const double orig = t[i];
  t[i] = orig + h;
  const double fp = f();
  t[i] = orig - h;
  const double fm = f();
  t[i] = orig;
  return (fp - fm) / (2 * h);
}

void expect_close_relative(double analytic, double numeric, double tol, const std::string& what) {
  EXPECT_LT(relative_error(analytic, numeric, 1e-6), tol) << what << ": analytic " << analytic << " numeric " << numeric;
}

}  // namespace

TEST(Tensor, ShapeAndData) {
  Tensor t(Shape{2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_DOUBLE_EQ(t.sum(), 36.0);
  EXPECT_THROW(Tensor(Shape{2, 0}), std::invalid_argument);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>(3)), std::invalid_argument);
  EXPECT_THROW(t.reshaped(Shape{5, 5}), std::invalid_argument);
  EXPECT_EQ(t.reshaped(Shape{24}).size(), 24u);
}

TEST(Tensor, RequireShapeNamesBothShapes) {
  Tensor t(Shape{2, 3});
  try {
    require_shape(t, Shape{3, 2}, "thing");
    FAIL() << "no throw";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
  }
}

TEST(Tensor, FiniteCheck) {
  Tensor t(Shape{3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng::stream(7, "init"), b = Rng::stream(7, "init"), c = Rng::stream(7, "shuffle"), d = Rng::stream(8, "init");
  const auto va = a.next_u64();
  EXPECT_EQ(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
  EXPECT_NE(va, d.next_u64());
  EXPECT_NE(stream_seed(1, "sample", 0), stream_seed(1, "sample", 1));
}

TEST(Rng, UniformAndBelowStayInRange) {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++counts[rng.below(7)];
  }
  // 5 sigma binomial band around 10000.
  for (int c : counts) EXPECT_NEAR(c, 10000, 5 * std::sqrt(70000 * (1.0 / 7) * (6.0 / 7)));
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(11);
  std::vector<std::size_t> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  rng.shuffle(v);
  std::vector<std::size_t> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Conv2d, ZeroInputGivesBias) {
  Rng rng(1);
  LayerParams p = random_conv(rng, 1, 2);
  const Tensor out = conv2d_forward(Tensor(Shape{1, 3, 3}), p);
  ASSERT_EQ(out.shape(), (Shape{2, 3, 3}));
  for (std::size_t co = 0; co < 2; ++co)
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(out[co * 9 + i], p.bias[co]);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(2);
  LayerParams p = LayerParams::conv2d(1, 1);
  p.weights[4] = 1.0;
  const Tensor in = random_tensor(rng, Shape{1, 5, 5});
  EXPECT_EQ(conv2d_forward(in, p), in);

  const Tensor g = random_tensor(rng, Shape{1, 5, 5});
  EXPECT_EQ(conv2d_backward(g, in, p), g);
}

TEST(Conv2d, MatchesLoopReference) {
  Rng rng(3);
  struct Case {
    std::size_t cin, cout, h, w;
  };
  // The second case takes the blocked path (channels and pixels divisible by the block sizes).
  for (const Case& c : {Case{2, 3, 5, 5}, Case{8, 16, 16, 16}, Case{3, 8, 32, 32}, Case{1, 4, 2, 6}}) {
    const LayerParams p = random_conv(rng, c.cin, c.cout);
    const Tensor in = random_tensor(rng, Shape{c.cin, c.h, c.w});
    const Tensor got = conv2d_forward(in, p);
    const Tensor want = reference_conv(in, p);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12) << "case cin=" << c.cin;
  }
}

TEST(Conv2d, ShapeMismatchNamesShapes) {
  const LayerParams p = LayerParams::conv2d(3, 8);
  try {
    conv2d_forward(Tensor(Shape{2, 4, 4}), p);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,4,4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[8,3,3,3]"), std::string::npos) << msg;
  }
}

TEST(Conv2d, ZeroCotangentAccumulatesNothing) {
  Rng rng(4);
  LayerParams p = random_conv(rng, 2, 4);
  const Tensor in = random_tensor(rng, Shape{2, 8, 8});
  const Tensor gi = conv2d_backward(Tensor(Shape{4, 8, 8}), in, p);
  for (double v : gi.values()) EXPECT_EQ(v, 0.0);
  for (double v : p.grad_weights.values()) EXPECT_EQ(v, 0.0);
  for (double v : p.grad_bias.values()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, MissingCacheRejected) {
  LayerParams p = LayerParams::conv2d(1, 1);
  EXPECT_THROW(conv2d_backward(Tensor(Shape{1, 4, 4}), Tensor(), p), std::invalid_argument);
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  struct Case {
    std::size_t cin, cout, h, w;
  };
  for (const Case& c : {Case{2, 3, 5, 5}, Case{2, 4, 8, 8}}) {
    LayerParams p = random_conv(rng, c.cin, c.cout);
    Tensor in = random_tensor(rng, Shape{c.cin, c.h, c.w});
    const Tensor r = random_tensor(rng, Shape{c.cout, c.h, c.w});
    const auto f = [&] { return dot(conv2d_forward(in, p), r); };
    const Tensor gi = conv2d_backward(r, in, p);
    for (std::size_t i = 0; i < in.size(); ++i) expect_close_relative(gi[i], numeric_partial(in, i, f), 1e-6, "input");
    for (std::size_t i = 0; i < p.weights.size(); ++i)
      expect_close_relative(p.grad_weights[i], numeric_partial(p.weights, i, f), 1e-6, "weight");
    for (std::size_t i = 0; i < p.bias.size(); ++i)
      expect_close_relative(p.grad_bias[i], numeric_partial(p.bias, i, f), 1e-6, "bias");
  }
}

TEST(Dense, ZeroWeightsGiveBias) {
  LayerParams p = LayerParams::dense(4, 3);
  p.bias = Tensor(Shape{3}, {0.5, -1.0, 2.0});
  EXPECT_EQ(dense_forward(Tensor(Shape{4}, 7.0), p), p.bias);
}

TEST(Dense, ScalarCase) {
  LayerParams p = LayerParams::dense(1, 1);
  p.weights[0] = 2.5;
  p.bias[0] = -0.5;
  EXPECT_DOUBLE_EQ(dense_forward(Tensor(Shape{1}, 3.0), p)[0], 7.0);
}

TEST(Dense, MatchesLoopReferenceAndFiniteDifferences) {
  Rng rng(6);
  LayerParams p = LayerParams::dense(7, 5);
  p.weights = random_tensor(rng, p.weights.shape());
  p.bias = random_tensor(rng, p.bias.shape());
  Tensor x = random_tensor(rng, Shape{7});
  const Tensor y = dense_forward(x, p);
  for (std::size_t o = 0; o < 5; ++o) {
    double s = p.bias[o];
    for (std::size_t i = 0; i < 7; ++i) s += p.weights[o * 7 + i] * x[i];
    EXPECT_NEAR(y[o], s, 1e-14);
  }
  const Tensor r = random_tensor(rng, Shape{5});
  const auto f = [&] { return dot(dense_forward(x, p), r); };
  const Tensor gx = dense_backward(r, x, p);
  for (std::size_t i = 0; i < x.size(); ++i) expect_close_relative(gx[i], numeric_partial(x, i, f), 1e-6, "input");
  for (std::size_t i = 0; i < p.weights.size(); ++i)
    expect_close_relative(p.grad_weights[i], numeric_partial(p.weights, i, f), 1e-6, "weight");
  for (std::size_t i = 0; i < p.bias.size(); ++i)
    expect_close_relative(p.grad_bias[i], numeric_partial(p.bias, i, f), 1e-6, "bias");
}

TEST(Dense, AcceptsFlattenedInput) {
  Rng rng(7);
  LayerParams p = LayerParams::dense(12, 2);
  p.weights = random_tensor(rng, p.weights.shape());
  const Tensor x = random_tensor(rng, Shape{3, 2, 2});
  EXPECT_EQ(dense_forward(x, p), dense_forward(x.reshaped(Shape{12}), p));
  EXPECT_THROW(dense_forward(Tensor(Shape{11}), p), std::invalid_argument);
}

TEST(Relu, SignCases) {
  const Tensor neg(Shape{4}, {-1.0, -0.5, -2.0, -1e-9});
  const Tensor zeroed = relu(neg);
  for (double v : zeroed.values()) EXPECT_EQ(v, 0.0);
  const Tensor pos(Shape{3}, {1.0, 0.25, 3.0});
  EXPECT_EQ(relu(pos), pos);
  // Subgradient at exactly 0 is 0.
  EXPECT_EQ(relu_backward(Tensor(Shape{1}, 1.0), Tensor(Shape{1}, 0.0))[0], 0.0);
}

TEST(Relu, FiniteDifferencesAwayFromKink) {
  Rng rng(8);
  Tensor x = random_tensor(rng, Shape{200});
  const Tensor r = random_tensor(rng, Shape{200});
  const auto f = [&] { return dot(relu(x), r); };
  const Tensor g = relu_backward(r, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < 1e-3) continue;
    expect_close_relative(g[i], numeric_partial(x, i, f), 1e-6, "relu");
  }
}

TEST(MaxPool, ConstantInputPicksFirstIndex) {
  const Tensor in(Shape{1, 4, 4}, 0.7);
  const auto [out, idx] = maxpool2x2(in);
  ASSERT_EQ(out.shape(), (Shape{1, 2, 2}));
  for (double v : out.values()) EXPECT_EQ(v, 0.7);
  EXPECT_EQ(idx.argmax, (std::vector<std::size_t>{0, 2, 8, 10}));
}

TEST(MaxPool, IncreasingRasterPicksBottomRight) {
  Tensor in(Shape{2, 4, 4});
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = static_cast<double>(i);
  const auto [out, idx] = maxpool2x2(in);
  EXPECT_EQ(idx.argmax, (std::vector<std::size_t>{5, 7, 13, 15, 21, 23, 29, 31}));
  EXPECT_EQ(out[0], 5.0);
}

TEST(MaxPool, MatchesLoopReferenceAndConservesGradient) {
  Rng rng(9);
  const Tensor in = random_tensor(rng, Shape{3, 6, 8});
  const auto [out, idx] = maxpool2x2(in);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        const double m = std::max({in.at(c, 2 * y, 2 * x), in.at(c, 2 * y, 2 * x + 1), in.at(c, 2 * y + 1, 2 * x),
                                   in.at(c, 2 * y + 1, 2 * x + 1)});
        EXPECT_EQ(out.at(c, y, x), m);
      }
  const Tensor g = random_tensor(rng, out.shape());
  const Tensor gi = maxpool_backward(g, idx);
  EXPECT_NEAR(gi.sum(), g.sum(), 1e-12);
  for (std::size_t k = 0; k < idx.argmax.size(); ++k) EXPECT_EQ(gi[idx.argmax[k]], g[k]);
}

TEST(MaxPool, OddDimensionsRejected) {
  EXPECT_THROW(maxpool2x2(Tensor(Shape{1, 3, 4})), std::invalid_argument);
  EXPECT_THROW(maxpool_backward(Tensor(Shape{1}), PoolIndices{}), std::invalid_argument);
}

TEST(Layers, ForwardIsPure) {
  Rng rng(10);
  const LayerParams p = random_conv(rng, 3, 8);
  const Tensor in = random_tensor(rng, Shape{3, 32, 32});
  EXPECT_TRUE(conv2d_forward(in, p).bit_equal(conv2d_forward(in, p)));
  EXPECT_TRUE(relu(in).bit_equal(relu(in)));
  EXPECT_TRUE(maxpool2x2(in).first.bit_equal(maxpool2x2(in).first));
}

TEST(Layers, InitWithinFanInScale) {
  Rng rng(12);
  LayerParams p = LayerParams::conv2d(8, 16);
  p.init_uniform(rng);
  const double s = std::sqrt(1.0 / 72.0);
  for (double v : p.weights.values()) EXPECT_LE(std::abs(v), s);
  for (double v : p.bias.values()) EXPECT_LE(std::abs(v), s);
}

TEST(Adam, ZeroGradientIsNoOp) {
  Tensor param(Shape{3}, {1.0, -2.0, 0.5});
  const Tensor before = param;
  Tensor grad(Shape{3});
  AdamState st = AdamState::for_shape(param.shape());
  for (int i = 1; i <= 5; ++i) {
    adam_step(param, grad, st);
    EXPECT_EQ(st.t, static_cast<std::uint64_t>(i));
  }
  EXPECT_TRUE(param.bit_equal(before));
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  Tensor param(Shape{1}, 0.0);
  AdamState st = AdamState::for_shape(param.shape(), 1e-3);
  double prev = 0.0, last_step = 0.0;
  for (int i = 0; i < 2000; ++i) {
    Tensor grad(Shape{1}, 0.37);
    adam_step(param, grad, st);
    last_step = prev - param[0];
    prev = param[0];
  }
  EXPECT_NEAR(last_step, 1e-3, 1e-7);
}

TEST(Adam, TwoStepsOnQuadraticMatchHandUnrolledTrace) {
  // f(x) = (x - 3)^2, x0 = 1, lr 0.1.
  Tensor x(Shape{1}, 1.0);
  AdamState st = AdamState::for_shape(x.shape(), 0.1);
  Tensor g(Shape{1}, 2.0 * (x[0] - 3.0));
  adam_step(x, g, st);
  // Step 1: g=-4, m=-0.4, v=0.016, mhat=-4, vhat=16, x = 1 + 0.1*4/(4+1e-8).
  const double x1 = 1.0 + 0.1 * 4.0 / (4.0 + 1e-8);
  EXPECT_NEAR(x[0], x1, 1e-15);
  EXPECT_EQ(g[0], 0.0);
  g[0] = 2.0 * (x[0] - 3.0);
  adam_step(x, g, st);
  const double g2 = 2.0 * (x1 - 3.0);
  const double m2 = 0.9 * (0.1 * -4.0) + 0.1 * g2;
  const double v2 = 0.999 * (0.001 * 16.0) + 0.001 * g2 * g2;
  const double mhat = m2 / (1 - 0.81), vhat = v2 / (1 - 0.999 * 0.999);
  EXPECT_NEAR(x[0], x1 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-14);
}

TEST(Adam, NonFiniteGradientAborts) {
  Tensor x(Shape{2});
  Tensor g(Shape{2}, {0.0, std::numeric_limits<double>::infinity()});
  AdamState st = AdamState::for_shape(x.shape());
  EXPECT_THROW(adam_step(x, g, st, "w"), std::runtime_error);
}

TEST(GradCheck, LinearLossIsExact) {
  Rng rng(13);
  // Small loss value, so rounding of f stays far below the gradient scale.
  Tensor w = random_tensor(rng, Shape{300}, -1e-3, 1e-3);
  const Tensor c = random_tensor(rng, Shape{300}, 0.5, 1.0);
  Tensor gw(Shape{300});
  const LossFn f = [&](bool with_grad) {
    if (with_grad)
      for (std::size_t i = 0; i < 300; ++i) gw[i] += c[i];
    return dot(w, c);
  };
  const auto r = grad_check(f, {ParamRef{"w", &w, &gw}});
  EXPECT_GE(r.coords_checked, 200u);
  EXPECT_LT(r.max_relative_error, 1e-10);
  EXPECT_TRUE(r.passed);
}

TEST(GradCheck, QuadraticLoss) {
  Rng rng(14);
  Tensor a = random_tensor(rng, Shape{120}, 0.05, 0.1), b = random_tensor(rng, Shape{150}, -0.1, 0.1);
  Tensor ga(Shape{120}), gb(Shape{150});
  const LossFn f = [&](bool with_grad) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += 1.5 * a[i] * a[i];
    for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * b[i] * 0.5 + b[i];
    if (with_grad) {
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += 3.0 * a[i];
      for (std::size_t i = 0; i < b.size(); ++i) gb[i] += b[i] + 1.0;
    }
    return s;
  };
  const auto r = grad_check(f, {ParamRef{"a", &a, &ga}, ParamRef{"b", &b, &gb}});
  EXPECT_GE(r.coords_checked, 200u);
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(GradCheck, DetectsWrongGradient) {
  Tensor w(Shape{250}, 1.0);
  Tensor gw(Shape{250});
  const LossFn f = [&](bool with_grad) {
    double s = 0.0;
    for (double v : w.values()) s += v * v;
    if (with_grad)
      for (std::size_t i = 0; i < 250; ++i) gw[i] += w[i];  // missing factor 2
    return s;
  };
  const auto r = grad_check(f, {ParamRef{"w", &w, &gw}});
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_relative_error, 0.5, 1e-6);
}

TEST(GradCheck, SkipsCoordinatesOnAnotherPiece) {
  // |x| with some coordinates within h of the kink.
  Tensor w(Shape{300});
  for (std::size_t i = 0; i < 300; ++i) w[i] = (i % 10 == 0) ? 3e-6 : 0.5 + 0.001 * static_cast<double>(i);
  Tensor gw(Shape{300});
  const LossFn f = [&](bool with_grad) {
    double s = 0.0;
    for (std::size_t i = 0; i < 300; ++i) {
      s += std::abs(w[i]);
      if (with_grad) gw[i] += w[i] > 0 ? 1.0 : -1.0;
    }
    return s;
  };
  const PieceFn piece = [&] {
    std::uint64_t h = 0;
    for (double v : w.values()) h = h * 31 + (v > 0);
    return h;
  };
  const auto naive = grad_check(f, {ParamRef{"w", &w, &gw}}, GradCheckOptions{.min_coords = 300});
  EXPECT_FALSE(naive.passed);
  const auto aware = grad_check(f, {ParamRef{"w", &w, &gw}}, GradCheckOptions{.min_coords = 250}, piece);
  EXPECT_TRUE(aware.passed);
  EXPECT_EQ(aware.coords_checked, 250u);
  EXPECT_GT(aware.coords_skipped, 0u);
}
