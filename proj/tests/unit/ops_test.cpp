#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssa/errors.hpp"
#include "ssa/grad_check.hpp"
#include "ssa/ops.hpp"
#include "ssa/parallel.hpp"
#include "test_util.hpp"

using namespace ssa;
using test::random_map;

namespace {

FeatureMap<double> fiber(std::vector<double> v) {
  const std::size_t f = v.size();
  return FeatureMap<double>({1, 1, f, 1, 1}, std::move(v));
}

}  // namespace

// Framewise convolution --------------------------------------------------------------

TEST(Conv2d, OnesKernelSumsWindow) {
  const FeatureMap<double> x({1, 1, 1, 3, 3}, 1.0);
  const FeatureMap<double> w({1, 1, 1, 3, 3}, 1.0);
  const auto y = conv2d_framewise<double>(x, w, {}, {});
  ASSERT_EQ(y.shape(), (Shape5{1, 1, 1, 1, 1}));
  EXPECT_EQ(y[0], 9.0);
}

TEST(Conv2d, UnitPointwiseKernelIsIdentity) {
  Rng rng(1);
  const auto x = random_map<double>({2, 1, 3, 4, 5}, rng);
  const FeatureMap<double> w({1, 1, 1, 1, 1}, 1.0);
  EXPECT_EQ(conv2d_framewise<double>(x, w, {}, {}), x);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  Rng rng(2);
  const auto x = random_map<double>({2, 4, 5, 8, 8}, rng);
  const auto w = random_map<double>({8, 4, 1, 3, 3}, rng);
  std::vector<double> bias(8);
  for (double& b : bias) b = rng.uniform(-1, 1);
  const Conv2dGeometry g{1, 1, 1};
  const auto got = conv2d_framewise<double>(x, w, bias, g);
  EXPECT_LT(max_relative_deviation(got, test::naive_conv(x, w, bias, g)), 1e-5);
}

TEST(Conv2d, MatchesOracleOverRandomGeometries) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t groups = 1 + rng.below(2);
    const std::size_t ci = groups * (1 + rng.below(3));
    const std::size_t co = groups * (1 + rng.below(3));
    const std::size_t k = 1 + 2 * rng.below(3);
    const std::size_t pad = rng.below(k / 2 + 1);
    const std::size_t stride = 1 + rng.below(2);
    const std::size_t hw = k + rng.below(5);
    const auto x = random_map<double>({1 + rng.below(2), ci, 1 + rng.below(3), hw, hw + rng.below(2)}, rng);
    const auto w = random_map<double>({co, ci / groups, 1, k, k}, rng);
    std::vector<double> bias;
    if (rng.bernoulli(0.5)) bias.assign(co, 0.25);
    const Conv2dGeometry g{stride, pad, groups};
    const auto got = conv2d_framewise<double>(x, w, bias, g);
    ASSERT_LT(max_relative_deviation(got, test::naive_conv(x, w, bias, g)), 1e-12) << "trial " << trial;
  }
}

TEST(Conv2d, FloatPathAgreesWithDouble) {
  Rng rng(4);
  const auto x = random_map<double>({2, 3, 4, 7, 7}, rng);
  const auto w = random_map<double>({5, 3, 1, 3, 3}, rng);
  const Conv2dGeometry g{2, 1, 1};
  const auto ref = conv2d_framewise<double>(x, w, {}, g);
  const auto got = conv2d_framewise<float>(x.cast<float>(), w.cast<float>(), {}, g);
  EXPECT_LT(max_relative_deviation(got.cast<double>(), ref), 1e-5);
}

TEST(Conv2d, OutputShapeFormula) {
  EXPECT_EQ(conv2d_output_shape({2, 4, 5, 9, 7}, {6, 2, 1, 3, 3}, {2, 1, 2}), (Shape5{2, 6, 5, 5, 4}));
}

TEST(Conv2d, RejectsInconsistentGeometry) {
  const FeatureMap<double> x({1, 4, 2, 3, 3});
  EXPECT_THROW(conv2d_framewise<double>(x, FeatureMap<double>({2, 3, 1, 3, 3}), {}, {}), DimensionError);
  EXPECT_THROW(conv2d_framewise<double>(x, FeatureMap<double>({2, 4, 2, 3, 3}), {}, {}), DimensionError);
  EXPECT_THROW(conv2d_framewise<double>(x, FeatureMap<double>({2, 4, 1, 5, 5}), {}, {}), DimensionError);
  EXPECT_THROW(conv2d_framewise<double>(x, FeatureMap<double>({3, 2, 1, 1, 1}), {}, {1, 0, 2}),
               DimensionError);
  const std::vector<double> bias(3);
  EXPECT_THROW(conv2d_framewise<double>(x, FeatureMap<double>({2, 4, 1, 1, 1}), bias, {}), DimensionError);
}

TEST(Conv2d, FramesAreIndependent) {
  Rng rng(5);
  const auto w = random_map<double>({3, 2, 1, 3, 3}, rng);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = random_map<double>({1, 2, 4, 5, 5}, rng);
    const auto before = conv2d_framewise<double>(x, w, {}, {1, 1, 1});
    const std::size_t t = rng.below(4);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 25; ++i) x.frame(0, c, t)[i] += rng.uniform(-3, 3);
    const auto after = conv2d_framewise<double>(x, w, {}, {1, 1, 1});
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t f = 0; f < 4; ++f) {
        if (f == t) continue;
        for (std::size_t i = 0; i < 25; ++i) ASSERT_EQ(before.frame(0, o, f)[i], after.frame(0, o, f)[i]);
      }
  }
}

TEST(Conv2d, LinearInInputAndWeights) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_map<double>({1, 2, 2, 4, 4}, rng);
    const auto y = random_map<double>({1, 2, 2, 4, 4}, rng);
    const auto w = random_map<double>({2, 2, 1, 3, 3}, rng);
    const auto v = random_map<double>({2, 2, 1, 3, 3}, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    FeatureMap<double> mix(x.shape()), wmix(w.shape());
    for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
    for (std::size_t i = 0; i < w.size(); ++i) wmix[i] = a * w[i] + b * v[i];
    const Conv2dGeometry g{1, 1, 1};
    const auto cx = conv2d_framewise<double>(x, w, {}, g), cy = conv2d_framewise<double>(y, w, {}, g);
    const auto cv = conv2d_framewise<double>(x, v, {}, g);
    const auto lhs_x = conv2d_framewise<double>(mix, w, {}, g);
    const auto lhs_w = conv2d_framewise<double>(x, wmix, {}, g);
    for (std::size_t i = 0; i < cx.size(); ++i) {
      ASSERT_LT(test::rel(lhs_x[i], a * cx[i] + b * cy[i]), 1e-5);
      ASSERT_LT(test::rel(lhs_w[i], a * cx[i] + b * cv[i]), 1e-5);
    }
  }
}

TEST(Conv2dBackward, ScalarProductRule) {
  const FeatureMap<double> x({1, 1, 1, 1, 1}, 3.0);
  const FeatureMap<double> w({1, 1, 1, 1, 1}, -2.0);
  const auto g = conv2d_framewise_backward<double>(x, w, true, {}, FeatureMap<double>({1, 1, 1, 1, 1}, 1.0));
  EXPECT_EQ(g.grad_weight[0], 3.0);
  EXPECT_EQ(g.grad_input[0], -2.0);
  EXPECT_EQ(g.grad_bias.at(0), 1.0);
}

TEST(Conv2dBackward, ZeroGradientGivesZeros) {
  Rng rng(7);
  const auto x = random_map<double>({2, 2, 3, 5, 5}, rng);
  const auto w = random_map<double>({4, 2, 1, 3, 3}, rng);
  const Conv2dGeometry g{2, 1, 1};
  const auto g0 = conv2d_framewise_backward<double>(x, w, true, g, FeatureMap<double>({2, 4, 3, 3, 3}));
  for (double v : g0.grad_input.data()) EXPECT_EQ(v, 0.0);
  for (double v : g0.grad_weight.data()) EXPECT_EQ(v, 0.0);
  for (double v : g0.grad_bias) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(conv2d_framewise_backward<double>(x, w, false, g, FeatureMap<double>({2, 4, 3, 5, 5})),
               DimensionError);
}

TEST(Conv2dBackward, AdjointOfForward) {
  // <conv(x), r> = <x, grad_input(r)> = <w, grad_weight(r)> for a bias-free kernel.
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t groups = 1 + rng.below(2);
    const auto x = random_map<double>({2, 2 * groups, 2, 6, 6}, rng);
    const auto w = random_map<double>({2 * groups, 2, 1, 3, 3}, rng);
    const Conv2dGeometry g{1 + rng.below(2), rng.below(2), groups};
    const auto y = conv2d_framewise<double>(x, w, {}, g);
    const auto r = random_map<double>(y.shape(), rng);
    const auto grads = conv2d_framewise_backward<double>(x, w, false, g, r);
    const double lhs = dot(y, r);
    ASSERT_LT(test::rel(lhs, dot(x, grads.grad_input)), 1e-10);
    ASSERT_LT(test::rel(lhs, dot(w, grads.grad_weight)), 1e-10);
  }
}

TEST(Conv2dBackward, MatchesFiniteDifferences) {
  Rng rng(9);
  GradCheckOptions opt;
  opt.epsilon = 1e-4;
  EXPECT_LT(grad_check_conv(rng, opt).max_rel_error(), 1e-4);
}

TEST(Conv2d, ThreadedBatchMatchesSingleThread) {
  Rng rng(10);
  const auto x = random_map<float>({6, 3, 4, 9, 9}, rng);
  const auto w = random_map<float>({5, 3, 1, 3, 3}, rng);
  const Conv2dGeometry g{1, 1, 1};
  const auto single = conv2d_framewise<float>(x, w, {}, g);
  const auto r = random_map<float>(single.shape(), rng);
  const auto gs = conv2d_framewise_backward<float>(x, w, false, g, r);
  set_num_threads(3);
  const auto multi = conv2d_framewise<float>(x, w, {}, g);
  const auto gm = conv2d_framewise_backward<float>(x, w, false, g, r);
  set_num_threads(1);
  EXPECT_EQ(multi, single);
  EXPECT_EQ(gm.grad_input, gs.grad_input);
  EXPECT_LT(max_relative_deviation(gm.grad_weight, gs.grad_weight), 1e-6);
}

// Pooling -------------------------------------------------------------------------------

TEST(TemporalPool, FiberExample) {
  const auto x = fiber({1, 3, 2, 5});
  const auto r = temporal_max_pool(x, {2, 2});
  EXPECT_EQ(r.output, fiber({3, 5}));
  EXPECT_EQ(temporal_max_pool_backward(r.indices, fiber({1, 1})), fiber({0, 1, 0, 1}));
  EXPECT_EQ(temporal_max_pool_backward(r.indices, fiber({0, 0})), fiber({0, 0, 0, 0}));
}

TEST(TemporalPool, UnitKernelIsIdentityAndFullKernelIsGlobalMax) {
  Rng rng(11);
  const auto x = random_map<double>({2, 3, 6, 2, 2}, rng);
  EXPECT_EQ(temporal_max_pool(x, {1, 1}).output, x);
  const auto full = temporal_max_pool(x, {6, 1}).output;
  ASSERT_EQ(full.shape().f, 1u);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t w = 0; w < 2; ++w) {
          double m = -1e9;
          for (std::size_t f = 0; f < 6; ++f) m = std::max(m, x(n, c, f, h, w));
          EXPECT_EQ(full(n, c, 0, h, w), m);
        }
}

TEST(TemporalPool, TiesGoToEarliestFrame) {
  const auto r = temporal_max_pool(fiber({2, 2, 1, 4, 4, 4}), {3, 3});
  EXPECT_EQ(temporal_max_pool_backward(r.indices, fiber({1, 1})), fiber({1, 0, 0, 1, 0, 0}));
}

TEST(TemporalPool, DepthFormulaOverRandomSpecs) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t f = 1 + rng.below(16);
    const std::size_t k = 1 + rng.below(f);
    const std::size_t s = 1 + rng.below(4);
    const Shape5 in{1 + rng.below(2), 1 + rng.below(3), f, 1 + rng.below(3), 1 + rng.below(3)};
    const Shape5 out = temporal_pool_output_shape(in, {k, s});
    ASSERT_EQ(out.f, (f - k) / s + 1);
    ASSERT_GE(out.f, 1u);
    const auto x = random_map<double>(in, rng);
    ASSERT_EQ(temporal_max_pool(x, {k, s}).output.shape(), out);
  }
  EXPECT_THROW(temporal_pool_output_shape({1, 1, 3, 1, 1}, {4, 1}), DimensionError);
}

TEST(TemporalPool, CommutesWithPermutationInsideWindows) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(4);
    const std::size_t windows = 1 + rng.below(3);
    const auto x = random_map<double>({1, 2, k * windows, 2, 2}, rng);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    FeatureMap<double> y(x.shape());
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t win = 0; win < windows; ++win)
        for (std::size_t j = 0; j < k; ++j)
          std::copy_n(x.frame(0, c, win * k + perm[j]), 4, y.frame(0, c, win * k + j));
    ASSERT_EQ(temporal_max_pool(x, {k, k}).output, temporal_max_pool(y, {k, k}).output);
  }
}

TEST(TemporalPool, StaleIndicesRejected) {
  const auto r = temporal_max_pool(fiber({1, 3, 2, 5}), {2, 2});
  EXPECT_THROW(max_pool_backward(r.indices, fiber({1, 1, 1})), DimensionError);
}

TEST(MaxPool3d, PaddedCellsNeverWin) {
  const FeatureMap<double> x({1, 1, 2, 2, 2}, -5.0);
  const auto r = max_pool3d(x, {{3, 3, 3}, {2, 2, 2}, {1, 1, 1}});
  ASSERT_EQ(r.output.shape(), (Shape5{1, 1, 1, 1, 1}));
  EXPECT_EQ(r.output[0], -5.0);
}

TEST(MaxPool3d, MatchesBruteForce) {
  Rng rng(14);
  const MaxPool3dSpec spec{{3, 3, 3}, {2, 2, 2}, {1, 1, 1}};
  const auto x = random_map<double>({2, 2, 5, 6, 7}, rng);
  const auto y = max_pool3d(x, spec).output;
  ASSERT_EQ(y.shape(), (Shape5{2, 2, 3, 3, 4}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t h = 0; h < 3; ++h)
          for (std::size_t w = 0; w < 4; ++w) {
            double m = -1e9;
            for (long a = 0; a < 3; ++a)
              for (long b = 0; b < 3; ++b)
                for (long d = 0; d < 3; ++d) {
                  const long ff = 2 * static_cast<long>(f) + a - 1, hh = 2 * static_cast<long>(h) + b - 1,
                             ww = 2 * static_cast<long>(w) + d - 1;
                  if (ff < 0 || hh < 0 || ww < 0 || ff >= 5 || hh >= 6 || ww >= 7) continue;
                  m = std::max(m, x(n, c, ff, hh, ww));
                }
            ASSERT_EQ(y(n, c, f, h, w), m);
          }
}

TEST(Pooling, GradientsMatchFiniteDifferences) {
  Rng rng(15);
  GradCheckOptions opt;
  EXPECT_LT(grad_check_pool(rng, opt).max_rel_error(), 1e-4);
}

// Batch normalization ------------------------------------------------------------------

TEST(BatchNorm, ConstantChannelsCollapseToShift) {
  FeatureMap<double> x({2, 2, 3, 2, 2});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t i = 0; i < 4; ++i) {
        x.frame(n, 0, f)[i] = 4.0;
        x.frame(n, 1, f)[i] = -7.0;
      }
  std::vector<double> scale{2.0, 3.0}, shift{0.5, -1.5}, mean(2, 0.0), var(2, 1.0);
  const auto y = batch_norm<double>(x, {scale, shift}, {mean, var}, Mode::Train);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(y.frame(n, 0, f)[i], 0.5);
        EXPECT_EQ(y.frame(n, 1, f)[i], -1.5);
      }
}

TEST(BatchNorm, NormalizesAndTracksStatisticsOverRandomCases) {
  Rng rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape5 s{1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4), 2 + rng.below(3)};
    auto x = random_map<double>(s, rng, -3.0, 5.0);
    std::vector<double> scale(s.c, 1.0), shift(s.c, 0.0), mean(s.c, 0.0), var(s.c, 1.0);
    const auto y = batch_norm<double>(x, {scale, shift}, {mean, var}, Mode::Train);
    const double m = static_cast<double>(s.n * s.f * s.h * s.w);
    for (std::size_t c = 0; c < s.c; ++c) {
      double xs = 0, ys = 0;
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t f = 0; f < s.f; ++f)
          for (std::size_t i = 0; i < s.h * s.w; ++i) {
            xs += x.frame(n, c, f)[i];
            ys += y.frame(n, c, f)[i];
          }
      const double xmean = xs / m, ymean = ys / m;
      double xv = 0, yv = 0;
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t f = 0; f < s.f; ++f)
          for (std::size_t i = 0; i < s.h * s.w; ++i) {
            xv += std::pow(x.frame(n, c, f)[i] - xmean, 2);
            yv += std::pow(y.frame(n, c, f)[i] - ymean, 2);
          }
      xv /= m;
      yv /= m;
      ASSERT_NEAR(ymean, 0.0, 1e-5);
      ASSERT_NEAR(yv, xv / (xv + kBatchNormEpsilon), 1e-5);
      ASSERT_NEAR(yv, 1.0, 1e-5 + kBatchNormEpsilon / xv);
      // Direct two-pass oracle for every element.
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t f = 0; f < s.f; ++f)
          for (std::size_t i = 0; i < s.h * s.w; ++i)
            ASSERT_NEAR(y.frame(n, c, f)[i],
                        (x.frame(n, c, f)[i] - xmean) / std::sqrt(xv + kBatchNormEpsilon), 1e-5);
      ASSERT_NEAR(mean[c], 0.1 * xmean, 1e-12);
      const double unbiased = m > 1 ? xv * m / (m - 1) : xv;
      ASSERT_NEAR(var[c], 0.9 + 0.1 * unbiased, 1e-12);
    }
  }
}

TEST(BatchNorm, EvalModeUsesRunningStatistics) {
  FeatureMap<double> x({1, 1, 1, 1, 2}, std::vector<double>{1.0, 3.0});
  std::vector<double> scale{2.0}, shift{1.0}, mean{1.0}, var{4.0};
  const auto y = batch_norm<double>(x, {scale, shift}, {mean, var}, Mode::Eval);
  const double inv = 1.0 / std::sqrt(4.0 + kBatchNormEpsilon);
  EXPECT_NEAR(y[0], 1.0, 1e-12);
  EXPECT_NEAR(y[1], 2.0 * 2.0 * inv + 1.0, 1e-12);
  EXPECT_EQ(mean[0], 1.0);
  EXPECT_EQ(var[0], 4.0);
}

TEST(BatchNorm, ChannelMismatchRejected) {
  FeatureMap<double> x({1, 2, 1, 1, 1});
  std::vector<double> one{1.0}, zero{0.0}, m{0.0}, v{1.0};
  EXPECT_THROW(batch_norm<double>(x, {one, zero}, {m, v}, Mode::Train), DimensionError);
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  Rng rng(17);
  GradCheckOptions opt;
  EXPECT_LT(grad_check_batch_norm(rng, opt).max_rel_error(), 1e-4);
}

// Pointwise, heads and linear ------------------------------------------------------------

TEST(Relu, ClampsNegatives) {
  const auto y = relu(fiber({-1, 2, 0}));
  EXPECT_EQ(y, fiber({0, 2, 0}));
  EXPECT_EQ(relu_backward(fiber({-1, 2, 0}), fiber({5, 5, 5})), fiber({0, 5, 0}));
}

TEST(GlobalAvgPool, OnesGiveOnes) {
  const FeatureMap<double> x({1, 2, 2, 2, 2}, 1.0);
  const auto m = global_avg_pool(x);
  ASSERT_EQ(m.rows(), 1u);
  ASSERT_EQ(m.cols(), 2u);
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 1), 1.0);
}

TEST(GlobalAvgPool, BackwardSpreadsEvenly) {
  Rng rng(18);
  const auto x = random_map<double>({2, 3, 2, 3, 2}, rng);
  const auto r = test::random_matrix<double>(2, 3, rng);
  const auto g = global_avg_pool_backward<double>(x.shape(), r);
  const auto y = global_avg_pool(x);
  double lhs = 0;
  for (std::size_t i = 0; i < y.data().size(); ++i) lhs += y.data()[i] * r.data()[i];
  EXPECT_NEAR(lhs, dot(x, g), 1e-12);
}

TEST(Flatten, RoundTrips) {
  Rng rng(19);
  const auto x = random_map<double>({2, 3, 2, 2, 2}, rng);
  const auto m = flatten(x);
  EXPECT_EQ(m.cols(), 24u);
  EXPECT_EQ(unflatten(x.shape(), m), x);
}

TEST(Linear, IdentityWeightsPassThrough) {
  Rng rng(20);
  const auto x = test::random_matrix<double>(3, 4, rng);
  Matrix<double> eye(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
  EXPECT_EQ(linear<double>(x, eye, std::vector<double>(4, 0.0)), x);
  EXPECT_THROW(linear<double>(x, Matrix<double>(2, 3), {}), DimensionError);
}

TEST(Linear, GradientsAreExact) {
  Rng rng(21);
  GradCheckOptions opt;
  EXPECT_LT(grad_check_linear(rng, opt).max_rel_error(), 1e-7);
}

TEST(Ops, FiniteInputsGiveFiniteOutputs) {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_map<float>({2, 3, 4, 5, 5}, rng, -100, 100);
    const auto w = random_map<float>({3, 3, 1, 3, 3}, rng);
    const auto y = conv2d_framewise<float>(x, w, {}, {1, 1, 1});
    ASSERT_TRUE(y.all_finite());
    std::vector<float> scale(3, 1.0f), shift(3, 0.0f), m(3, 0.0f), v(3, 1.0f);
    BatchNormCache<float> cache;
    const auto z = batch_norm<float>(y, {scale, shift}, {m, v}, Mode::Train, &cache);
    ASSERT_TRUE(z.all_finite());
    ASSERT_TRUE(batch_norm_backward<float>(cache, {scale, shift}, z).grad_input.all_finite());
  }
}
