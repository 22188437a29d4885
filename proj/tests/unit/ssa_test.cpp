#include <gtest/gtest.h>

#include "ssa/errors.hpp"
#include "ssa/grad_check.hpp"
#include "ssa/ssa_layer.hpp"
#include "test_util.hpp"

using namespace ssa;
using test::random_map;

namespace {

FeatureMap<double> fiber(std::vector<double> v) {
  const std::size_t f = v.size();
  return FeatureMap<double>({1, 1, f, 1, 1}, std::move(v));
}

SsaConfig random_cap(Rng& rng, std::size_t f) {
  const std::size_t pick = rng.below(f + 2);
  return pick > f ? SsaConfig::all_shifts() : SsaConfig::fixed(pick);
}

}  // namespace

TEST(SsaConfig, ParsesAndPrints) {
  EXPECT_TRUE(SsaConfig::parse("all").is_all());
  EXPECT_EQ(SsaConfig::parse("3"), SsaConfig::fixed(3));
  EXPECT_EQ(SsaConfig::fixed(2).str(), "2");
  EXPECT_EQ(SsaConfig::all_shifts().str(), "all");
  EXPECT_THROW(SsaConfig::parse("-1"), SpecError);
  EXPECT_THROW(SsaConfig::parse("two"), SpecError);
}

TEST(SsaConfig, EffectiveShiftCount) {
  EXPECT_EQ(SsaConfig::all_shifts().max_shift(8), 7u);
  EXPECT_EQ(SsaConfig::fixed(3).max_shift(8), 3u);
  EXPECT_EQ(SsaConfig::fixed(12).max_shift(8), 7u);
  EXPECT_EQ(SsaConfig::fixed(0).max_shift(8), 0u);
  EXPECT_EQ(SsaConfig::all_shifts().max_shift(1), 0u);
}

TEST(SsaWeightRule, DecreasingAndBounded) {
  for (std::size_t f = 2; f <= 32; ++f) {
    for (std::size_t d = 1; d < f; ++d) {
      const double w = SsaWeightRule::weight(d, f);
      EXPECT_GT(w, 0.0);
      EXPECT_LT(w, 1.0 / f);
      if (d + 1 < f) EXPECT_GT(w, SsaWeightRule::weight(d + 1, f));
    }
  }
  EXPECT_DOUBLE_EQ(SsaWeightRule::weight(1, 2), 0.25);
}

TEST(SsaForward, TwoFrameHandExample) {
  for (auto* fn : {&ssa_forward_reference<double>, &ssa_forward_cumulative<double>}) {
    const auto y = fn(fiber({0, 4}), SsaConfig::all_shifts());
    EXPECT_DOUBLE_EQ(y[0], 0.0);
    EXPECT_DOUBLE_EQ(y[1], 5.0);
  }
}

TEST(SsaForward, ThreeFrameHandExample) {
  for (auto* fn : {&ssa_forward_reference<double>, &ssa_forward_cumulative<double>}) {
    const auto y = fn(fiber({1, 2, 3}), SsaConfig::all_shifts());
    EXPECT_NEAR(y[0], 1.0, 1e-15);
    EXPECT_NEAR(y[1], 2.0 + 2.0 / 9.0, 1e-15);
    EXPECT_NEAR(y[2], 3.0 + 4.0 / 9.0, 1e-15);
  }
}

TEST(SsaForward, CappedShiftKeepsFullDepthWeights) {
  // f = 4, cap 1: only neighbours contribute, each with weight 3/16.
  const auto y = ssa_forward_cumulative(fiber({0, 1, 3, 6}), SsaConfig::fixed(1));
  EXPECT_DOUBLE_EQ(y[1], 1.0 + 3.0 / 16.0 * 1.0);
  EXPECT_DOUBLE_EQ(y[2], 3.0 + 3.0 / 16.0 * 2.0);
  EXPECT_DOUBLE_EQ(y[3], 6.0 + 3.0 / 16.0 * 3.0);
}

TEST(SsaForward, ConstantFiberUnchanged) {
  const auto x = fiber({2.5, 2.5, 2.5, 2.5, 2.5});
  EXPECT_EQ(ssa_forward_cumulative(x, SsaConfig::all_shifts()), x);
  EXPECT_EQ(ssa_forward_reference(x, SsaConfig::all_shifts()), x);
}

TEST(SsaForward, MatchesScalarOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t f = 1 + rng.below(16);
    const SsaConfig cfg = random_cap(rng, f);
    const auto x = random_map<double>({1, 1, f, 1, 1}, rng);
    const auto y = ssa_forward_cumulative(x, cfg);
    const auto expect = test::scalar_ssa({x.data().begin(), x.data().end()}, cfg.max_shift(f));
    for (std::size_t i = 0; i < f; ++i) ASSERT_NEAR(y[i], expect[i], 1e-12);
  }
}

TEST(SsaForward, ReferenceAndCumulativeAgree) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t f = 1 + rng.below(16);
    const Shape5 s{1 + rng.below(2), 1 + rng.below(8), f, 1 + rng.below(8), 1 + rng.below(8)};
    const SsaConfig cfg = random_cap(rng, f);
    const auto x = random_map<float>(s, rng);
    ASSERT_LT(max_relative_deviation(ssa_forward_reference(x, cfg), ssa_forward_cumulative(x, cfg)), 1e-5);
  }
}

TEST(SsaForward, FixedZeroIsBitwiseIdentity) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_map<float>(test::random_shape(rng, 2, 4, 16, 6), rng, -1e3, 1e3);
    ASSERT_EQ(ssa_forward_cumulative(x, SsaConfig::fixed(0)), x);
    ASSERT_EQ(ssa_forward_reference(x, SsaConfig::fixed(0)), x);
    ASSERT_EQ(ssa_backward(x, SsaConfig::fixed(0)), x);
  }
}

TEST(SsaForward, SingleFrameIsIdentity) {
  Rng rng(4);
  const auto x = random_map<double>({2, 3, 1, 4, 4}, rng);
  EXPECT_EQ(ssa_forward_cumulative(x, SsaConfig::all_shifts()), x);
}

TEST(SsaProperties, Linearity) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape5 s = test::random_shape(rng, 2, 3, 12, 4);
    const SsaConfig cfg = random_cap(rng, s.f);
    const auto x = random_map<double>(s, rng), y = random_map<double>(s, rng);
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    FeatureMap<double> mix(s);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
    const auto lhs = ssa_forward(mix, cfg);
    const auto sx = ssa_forward(x, cfg), sy = ssa_forward(y, cfg);
    for (std::size_t i = 0; i < lhs.size(); ++i) ASSERT_LT(test::rel(lhs[i], a * sx[i] + b * sy[i]), 1e-5);
  }
}

TEST(SsaProperties, Causality) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape5 s = test::random_shape(rng, 2, 3, 12, 4);
    const SsaConfig cfg = random_cap(rng, s.f);
    const auto x = random_map<double>(s, rng);
    const std::size_t keep = rng.below(s.f);
    auto cut = x;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t f = keep + 1; f < s.f; ++f)
          for (std::size_t i = 0; i < s.frame_size(); ++i) cut.frame(n, c, f)[i] = 0.0;
    const auto a = ssa_forward(x, cfg), b = ssa_forward(cut, cfg);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t f = 0; f <= keep; ++f)
          for (std::size_t i = 0; i < s.frame_size(); ++i) ASSERT_EQ(a.frame(n, c, f)[i], b.frame(n, c, f)[i]);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t i = 0; i < s.frame_size(); ++i) ASSERT_EQ(a.frame(n, c, 0)[i], x.frame(n, c, 0)[i]);
  }
}

TEST(SsaProperties, FiberIndependence) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape5 s{1 + rng.below(2), 1 + rng.below(3), 2 + rng.below(10), 2 + rng.below(3), 2 + rng.below(3)};
    const SsaConfig cfg = random_cap(rng, s.f);
    const auto x = random_map<double>(s, rng);
    const std::size_t n0 = rng.below(s.n), c0 = rng.below(s.c), h0 = rng.below(s.h), w0 = rng.below(s.w);
    auto y = x;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t f = 0; f < s.f; ++f)
          for (std::size_t h = 0; h < s.h; ++h)
            for (std::size_t w = 0; w < s.w; ++w)
              if (n != n0 || c != c0 || h != h0 || w != w0) y(n, c, f, h, w) = rng.uniform(-5, 5);
    const auto a = ssa_forward(x, cfg), b = ssa_forward(y, cfg);
    for (std::size_t f = 0; f < s.f; ++f) ASSERT_EQ(a(n0, c0, f, h0, w0), b(n0, c0, f, h0, w0));
  }
}

TEST(SsaProperties, AdjointConsistency) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape5 s = test::random_shape(rng, 2, 4, 16, 5);
    const SsaConfig cfg = random_cap(rng, s.f);
    const auto x = random_map<double>(s, rng), y = random_map<double>(s, rng);
    ASSERT_LT(test::rel(dot(ssa_forward(x, cfg), y), dot(x, ssa_backward(y, cfg))), 1e-5);
  }
}

TEST(SsaBackward, TwoFrameTranspose) {
  const auto g = ssa_backward(fiber({2.0, 8.0}), SsaConfig::all_shifts());
  EXPECT_DOUBLE_EQ(g[0], 2.0 - 8.0 / 4.0);
  EXPECT_DOUBLE_EQ(g[1], 8.0 * 1.25);
}

TEST(SsaBackward, MatchesExplicitMatrixTranspose) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t f = 1 + rng.below(12);
    const SsaConfig cfg = random_cap(rng, f);
    const std::size_t cap = cfg.max_shift(f);
    std::vector<double> a(f * f, 0.0);
    for (std::size_t i = 0; i < f; ++i) {
      a[i * f + i] = 1.0;
      for (std::size_t d = 1; d <= std::min(cap, i); ++d) {
        a[i * f + i] += SsaWeightRule::weight(d, f);
        a[i * f + i - d] -= SsaWeightRule::weight(d, f);
      }
    }
    const auto g = random_map<double>({1, 1, f, 1, 1}, rng);
    const auto got = ssa_backward(g, cfg);
    for (std::size_t j = 0; j < f; ++j) {
      double expect = 0;
      for (std::size_t i = 0; i < f; ++i) expect += a[i * f + j] * g[i];
      ASSERT_NEAR(got[j], expect, 1e-12);
    }
  }
}

TEST(SsaBackward, MatchesFiniteDifferences) {
  Rng rng(10);
  GradCheckOptions opt;
  opt.epsilon = 1e-4;
  for (const SsaConfig cfg : {SsaConfig::all_shifts(), SsaConfig::fixed(1), SsaConfig::fixed(3)}) {
    EXPECT_LT(grad_check_ssa(rng, opt, cfg).max_rel_error(), 1e-6) << cfg.str();
  }
}

TEST(SsaLayer, HasNoParameters) { EXPECT_EQ(ssa_param_count(), 0u); }
