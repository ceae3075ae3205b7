#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "jacdiff/quadrature.hpp"
#include "oracles.hpp"

namespace jd = jacdiff;

TEST(GaussJacobi, WeightsSumToWeightIntegral) {
  for (double a : {-0.7, 0.0, 0.5, 5.0}) {
    for (double b : {-0.3, 0.0, 2.0}) {
      const auto rule = jd::gauss_jacobi(20, a, b);
      const double sum = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
      const double ref = oracle::integrate(
          [&](double, double omt, double opl) { return std::pow(omt, a) * std::pow(opl, b); });
      EXPECT_NEAR(sum / ref, 1.0, 1e-11) << "a=" << a << " b=" << b;
    }
  }
}

TEST(GaussJacobi, NodesSortedInsideInterval) {
  const auto rule = jd::gauss_jacobi(64, 3.0, 0.5);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    EXPECT_GT(rule.nodes[i], -1.0);
    EXPECT_LT(rule.nodes[i], 1.0);
    EXPECT_GT(rule.weights[i], 0.0);
    if (i > 0) {
      EXPECT_GT(rule.nodes[i], rule.nodes[i - 1]);
    }
  }
}

TEST(GaussJacobi, ExactForPolynomialsUpToDegree2NMinus1) {
  const int points = 6;
  for (double a : {-0.5, 1.0, 4.5}) {
    for (double b : {0.0, 2.5}) {
      for (int p = 0; p < 2 * points; ++p) {
        const double got = jd::integrate_weighted(a, b, [p](double t) { return std::pow(t, p); }, points);
        const double ref = oracle::integrate(
            [&](double t, double omt, double opl) { return std::pow(omt, a) * std::pow(opl, b) * std::pow(t, p); });
        EXPECT_NEAR(got, ref, 1e-11 * std::max(1.0, std::abs(ref))) << "p=" << p;
      }
    }
  }
}

TEST(GaussJacobi, SinglePoint) {
  const auto rule = jd::gauss_jacobi(1, 1.0, 0.0);
  ASSERT_EQ(rule.nodes.size(), 1u);
  EXPECT_NEAR(rule.weights[0], 2.0, 1e-14);
  EXPECT_NEAR(rule.nodes[0], -1.0 / 3.0, 1e-14);
}

TEST(GaussJacobi, RejectsBadArguments) {
  EXPECT_THROW(jd::gauss_jacobi(0, 0.0, 0.0), jd::ParameterError);
  EXPECT_THROW(jd::gauss_jacobi(5, -1.0, 0.0), jd::ParameterError);
}

TEST(GaussJacobi, CacheReturnsSameRule) {
  const auto a = jd::cached_gauss_jacobi(17, 2.0, 3.0);
  const auto b = jd::cached_gauss_jacobi(17, 2.0, 3.0);
  EXPECT_EQ(a.get(), b.get());
}

TEST(AbsWeightedIntegral, MatchesIndependentQuadrature) {
  struct Case {
    double a, b;
  };
  for (const Case c : {Case{0.0, 0.0}, Case{2.0, 5.0}, Case{-0.5, 0.3}, Case{0.4, -0.8}}) {
    auto g = [](double t) { return std::cos(5.0 * t) - 0.2 * t; };
    const double got = jd::abs_weighted_integral(c.a, c.b, g);
    const double ref = oracle::integrate_abs(
        [&](double t, double omt, double opl) { return std::pow(omt, c.a) * std::pow(opl, c.b) * g(t); });
    EXPECT_NEAR(got, ref, 1e-9 * ref) << "a=" << c.a << " b=" << c.b;
  }
}

TEST(AbsWeightedIntegral, OneSignedEqualsPlainIntegral) {
  auto g = [](double t) { return 2.0 + t * t; };
  EXPECT_NEAR(jd::abs_weighted_integral(1.0, 2.0, g), jd::integrate_weighted(1.0, 2.0, g), 1e-13);
}

TEST(AbsWeightedIntegral, ExtraBreakAtZeroHandlesKink) {
  auto g = [](double t) { return t * t * t; };
  // ∫ |t|^3 dt = 1/2
  EXPECT_NEAR(jd::abs_weighted_integral(0.0, 0.0, g, {0.0}), 0.5, 1e-14);
}
