#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "jacdiff/error_model.hpp"
#include "jacdiff/harness.hpp"
#include "jacdiff/test_functions.hpp"
#include "oracles.hpp"

namespace jd = jacdiff;

namespace {

jd::DerivativeFn derivatives_of(const jd::TestFunction& f) {
  return [f](int k, double x) { return f.derivative(k, x); };
}

jd::SignalGrid grid_on(double a, double b, double step) {
  return {a, step, static_cast<std::size_t>(std::lround((b - a) / step)) + 1};
}

}  // namespace

TEST(C3, ClosedFormCases) {
  EXPECT_NEAR(jd::compute_c3(jd::make_rho(0, 0.0, 0.0)), 1.0, 1e-12);
  EXPECT_NEAR(jd::compute_c3(jd::make_rho(1, 0.0, 0.0)), 1.5, 1e-12);
}

TEST(C3C4, MatchIndependentQuadrature) {
  for (const jd::EstimatorParams p : {jd::EstimatorParams{1, 5.0, 5.0, 4}, jd::EstimatorParams{2, 0.0, 1.0, 3},
                                      jd::EstimatorParams{3, 2.0, 2.0, 2}, jd::EstimatorParams{1, -0.5, 0.5, 2}}) {
    const auto k = jd::make_kernel(p);
    auto kern = [&](double t, double omt, double opl) { return oracle::affine_q(p.n, p.alpha, p.beta, p.q, t, omt, opl); };
    const double c3 = oracle::integrate_abs(kern);
    const int e = p.n + p.q + 2;
    const double c4 = oracle::integrate_abs(
        [&](double t, double omt, double opl) { return std::pow(t, e) * kern(t, omt, opl); });
    EXPECT_NEAR(jd::compute_c3(k), c3, 1e-8 * c3) << "n=" << p.n << " a=" << p.alpha;
    EXPECT_NEAR(jd::compute_c4(k), c4, 1e-8 * c4 + 1e-12) << "n=" << p.n << " a=" << p.alpha;
  }
}

TEST(C3, IncreasesWithQ) {
  for (int n : {1, 2}) {
    for (double a : {0.0, 5.0, 10.0}) {
      for (int q : {0, 2, 4, 6}) {
        EXPECT_LE(jd::compute_c3(jd::make_kernel({n, a, a, q})),
                  jd::compute_c3(jd::make_kernel({n, a, a, q + 2})) + 1e-8);
      }
    }
  }
}

TEST(C3C4, MonotoneInAlpha) {
  for (int n = 1; n <= 4; ++n) {
    double prev_c3 = 0, prev_c4 = INFINITY;
    for (int a = 0; a <= 10; ++a) {
      const auto k = jd::make_kernel({n, double(a), double(a), 4});
      const double c3 = jd::compute_c3(k), c4 = jd::compute_c4(k);
      EXPECT_GE(c3, prev_c3 - 1e-8) << "n=" << n << " a=" << a;
      EXPECT_LE(c4, prev_c4 + 1e-8) << "n=" << n << " a=" << a;
      prev_c3 = c3;
      prev_c4 = c4;
    }
  }
}

TEST(BiasConstant, ConstantKernel) {
  EXPECT_NEAR(jd::compute_c_bias_constant(jd::make_rho(0, 0.0, 0.0), 1.0), 1.0 / 6.0, 1e-14);
}

TEST(BiasConstant, BranchSelectsExponent) {
  const auto gen = jd::make_affine_q({1, 1.0, 2.0, 2});
  EXPECT_EQ(jd::branch_of(gen), jd::Branch::kGeneral);
  EXPECT_EQ(jd::bound_derivative_order(gen), 4);
  const double ref = oracle::integrate_abs([](double t) { return std::pow(t, 4) * oracle::affine_q(1, 1.0, 2.0, 2, t); }) / 24.0;
  EXPECT_NEAR(jd::compute_c_bias_constant(gen, 1.0), ref, 1e-9 * ref);
  const auto ultra = jd::make_kernel({1, 5.0, 5.0, 4});
  EXPECT_EQ(jd::branch_of(ultra), jd::Branch::kUltraspherical);
  EXPECT_EQ(jd::bound_derivative_order(ultra), 7);
  EXPECT_NEAR(jd::compute_c_bias_constant(ultra, 5040.0), jd::compute_c4(ultra), 1e-12);
}

TEST(BiasConstant, RejectsNonPositiveBound) {
  const auto k = jd::make_kernel({1, 5.0, 5.0, 4});
  EXPECT_THROW(jd::compute_c_bias_constant(k, 0.0), jd::ParameterError);
  EXPECT_THROW(jd::compute_c_bias_constant(k, -1.0), jd::ParameterError);
}

TEST(Bounds, Arithmetic) {
  EXPECT_EQ(jd::bound_noise(3.0, 0.0, 0.5, 1), 0.0);
  EXPECT_EQ(jd::bound_bias(2.5, 1.0, 4, jd::Branch::kGeneral), 2.5);
  EXPECT_NEAR(jd::bound_bias(2.0, 0.5, 4, jd::Branch::kUltraspherical), 0.03125, 1e-15);
  EXPECT_NEAR(jd::bound_bias(2.0, 0.5, 4, jd::Branch::kGeneral), 0.0625, 1e-15);
  EXPECT_NEAR(jd::bound_noise(3.0, 0.15, 0.5, 1), 0.9, 1e-15);
  EXPECT_THROW(jd::bound_bias(1.0, 0.0, 4, jd::Branch::kGeneral), jd::ParameterError);
  EXPECT_THROW(jd::bound_noise(1.0, 0.1, -1.0, 1), jd::ParameterError);
}

TEST(BoundNumerical, ConstantIntegrandHasNoError) {
  EXPECT_NEAR(jd::bound_numerical(jd::make_rho(0, 0.0, 0.0), [](double) { return 3.0; }, 0.0, 0.5, 10), 0.0, 1e-9);
}

TEST(BoundNumerical, InverseSquareInM) {
  const auto k = jd::make_rho(2, 2.0, 2.0);
  auto f = [](double x) { return x * x; };
  const double b1 = jd::bound_numerical(k, f, 0.3, 0.2, 50);
  const double b2 = jd::bound_numerical(k, f, 0.3, 0.2, 100);
  EXPECT_GT(b1, 0.0);
  EXPECT_NEAR(b2 / b1, 0.25, 1e-12);
}

TEST(BoundNumerical, MatchesGridSupOracle) {
  const jd::TestFunction f2(jd::TestFunctionId::kF2);
  const auto k = jd::make_kernel({1, 5.0, 5.0, 4});
  const double x = 2.0, h = 0.442;
  const int m = 442;
  const double got = jd::bound_numerical(k, f2, x, h, m);
  // exact second derivative of k(t) f(x + h t) on the same grid, with k'' by
  // finite differences of the independent kernel oracle
  double sup = 0;
  for (int i = 1; i < 2000; ++i) {
    const double t = -1.0 + 2.0 * i / 2000;
    const double d = 1e-4;
    auto kq = [](double s) { return oracle::affine_q(1, 5.0, 5.0, 4, s); };
    const double k0 = kq(t), k1 = (kq(t + d) - kq(t - d)) / (2 * d), k2 = (kq(t + d) - 2 * k0 + kq(t - d)) / (d * d);
    const double y = x + h * t;
    const double second = k2 * f2(y) + 2 * h * k1 * f2.derivative(1, y) + h * h * k0 * f2.derivative(2, y);
    sup = std::max(sup, std::abs(second));
  }
  EXPECT_TRUE(std::isfinite(got));
  EXPECT_GT(got, 0.0);
  EXPECT_NEAR(got, 8.0 / (12.0 * 4.0 * m * m) * sup, 1e-3 * got);
}

TEST(BoundNumerical, RejectsUnevaluableIntegrand) {
  const auto k = jd::make_rho(1, 1.0, 1.0);
  EXPECT_THROW(jd::bound_numerical(k, [](double) { return NAN; }, 0.0, 0.1, 10), jd::EvaluationError);
}

TEST(OptimalH, UltrasphericalExample) {
  const auto w = jd::optimal_h(1.0, 1.0, 1.0, 1, 4, jd::Branch::kUltraspherical);
  ASSERT_TRUE(w.has_value());
  EXPECT_NEAR(w->h, std::pow(1.0 / 6.0, 1.0 / 7.0), 1e-14);
  EXPECT_NEAR(w->h, 0.77417, 1e-5);
}

TEST(OptimalH, NoMinimizerWithoutNoiseOrDerivative) {
  EXPECT_FALSE(jd::optimal_h(1.0, 1.0, 0.0, 1, 4, jd::Branch::kGeneral).has_value());
  EXPECT_FALSE(jd::optimal_h(1.0, 1.0, 0.1, 0, 4, jd::Branch::kGeneral).has_value());
}

TEST(OptimalH, ShrinksWithNoise) {
  double prev = INFINITY;
  for (double d : {1e-1, 1e-3, 1e-6, 1e-9, 1e-12}) {
    const double h = jd::optimal_h(2.0, 3.0, d, 2, 2, jd::Branch::kGeneral)->h;
    EXPECT_LT(h, prev);
    prev = h;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(OptimalH, MatchesGridMinimizationAndClosedFormValue) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> order(1, 4), trunc(0, 6);
  std::uniform_real_distribution<double> logc(-2.0, 2.0), logd(-4.0, -0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = order(rng), q = trunc(rng);
    const double c2 = std::pow(10.0, logc(rng)), c3 = std::pow(10.0, logc(rng)), delta = std::pow(10.0, logd(rng));
    for (auto branch : {jd::Branch::kGeneral, jd::Branch::kUltraspherical}) {
      const int r = jd::bias_order(q, branch);
      const auto w = jd::optimal_h(c2, c3, delta, n, q, branch);
      ASSERT_TRUE(w.has_value());
      auto psi = [&](double h) { return c2 * std::pow(h, r) + c3 * delta / std::pow(h, n); };
      const double grid = oracle::grid_argmin(psi, w->h / 100.0, w->h * 100.0);
      EXPECT_NEAR(grid / w->h, 1.0, 0.01);
      for (int i = 0; i < 1000; ++i) {
        const double h = w->h / 100.0 * std::pow(1e4, i / 999.0);
        EXPECT_LE(w->psi, psi(h) * (1 + 1e-14));
      }
      if (branch == jd::Branch::kGeneral) {
        const double s = n + q + 1.0;
        const double closed = (s / (q + 1.0)) * std::pow((q + 1.0) / n, n / s) * std::pow(c2, n / s) *
                              std::pow(c3, (q + 1.0) / s) * std::pow(delta, (q + 1.0) / s);
        EXPECT_NEAR(w->psi / closed, 1.0, 1e-10);
      }
    }
  }
}

TEST(SelectWindowGlobal, ReproducesTableWindows) {
  const auto grid = grid_on(-4.0, 4.0, 1e-3);
  const auto k = jd::make_kernel({1, 5.0, 5.0, 4});
  const auto c2 = jd::select_window_global(grid, {-2.0, 2.0}, derivatives_of(jd::TestFunction(jd::TestFunctionId::kF2)), k, 0.15);
  EXPECT_NEAR(c2.m, 442, 0.15 * 442);
  const auto c1 = jd::select_window_global(grid, {-2.0, 2.0}, derivatives_of(jd::TestFunction(jd::TestFunctionId::kF1)), k, 0.15);
  EXPECT_NEAR(c1.m, 591, 0.15 * 591);
  EXPECT_NEAR(c1.budget.b_total, c1.budget.b_bias + c1.budget.b_noise + c1.budget.b_num, 1e-15);
  EXPECT_EQ(c1.budget.branch, jd::Branch::kUltraspherical);
}

TEST(SelectWindowGlobal, SmallerNoiseSmallerWindow) {
  const auto grid = grid_on(-4.0, 4.0, 1e-3);
  const auto k = jd::make_kernel({2, 5.0, 5.0, 4});
  const auto info = derivatives_of(jd::TestFunction(jd::TestFunctionId::kF2));
  const int m_hi = jd::select_window_global(grid, {-2.0, 2.0}, info, k, 0.15).m;
  const int m_lo = jd::select_window_global(grid, {-2.0, 2.0}, info, k, 0.015).m;
  EXPECT_LT(m_lo, m_hi);
}

TEST(SelectWindowGlobal, EqualsExhaustiveScan) {
  const auto grid = grid_on(-4.0, 4.0, 1e-2);
  const auto k = jd::make_kernel({2, 5.0, 5.0, 4});
  const auto info = derivatives_of(jd::TestFunction(jd::TestFunctionId::kF1));
  const jd::Interval range{-2.0, 2.0};
  const auto choice = jd::select_window_global(grid, range, info, k, 0.015);
  const jd::GlobalBudgetModel model(k, info, range, grid.step, 0.015);
  const auto [lo, hi] = jd::window_scan_range(grid, range, k, {});
  int best = lo;
  double best_total = INFINITY;
  for (int m = lo; m <= hi; ++m) {
    const double t = model.budget(m).b_total;
    if (t < best_total) {
      best_total = t;
      best = m;
    }
  }
  EXPECT_EQ(choice.m, best);
  EXPECT_DOUBLE_EQ(choice.budget.b_total, best_total);
}

TEST(SelectWindowGlobal, EmptyScanRangeIsParameterError) {
  const auto k = jd::make_kernel({1, 5.0, 5.0, 4});
  const auto info = derivatives_of(jd::TestFunction(jd::TestFunctionId::kF2));
  EXPECT_THROW(jd::select_window_global(grid_on(-2.01, 2.01, 1e-3), {-2.0, 2.0}, info, k, 0.15), jd::ParameterError);
}

TEST(SelectWindowGlobal, UserSuppliedBounds) {
  const auto grid = grid_on(-4.0, 4.0, 1e-3);
  const auto k = jd::make_kernel({1, 5.0, 5.0, 4});
  const jd::DerivativeBounds bounds{1e4, std::nullopt};
  const auto choice = jd::select_window_global(grid, {-2.0, 2.0}, bounds, k, 0.15);
  EXPECT_EQ(choice.budget.b_num, 0.0);
  EXPECT_EQ(choice.budget.m_bound, 1e4);
  // the continuous optimum, quantized, is within one sample of the discrete choice
  const auto w = jd::optimal_h(choice.budget.c_bias, choice.budget.c3, 0.15, 1, 4, jd::Branch::kUltraspherical);
  EXPECT_NEAR(choice.m, w->h / grid.step, 1.0);
  EXPECT_THROW(jd::select_window_global(grid, {-2.0, 2.0}, jd::DerivativeBounds{0.0, std::nullopt}, k, 0.15),
               jd::ParameterError);
}

TEST(SelectWindowLocal, InteriorWindowsLargerThanEdges) {
  const auto grid = grid_on(-4.0, 4.0, 1e-3);
  const auto k = jd::make_kernel({1, 5.0, 5.0, 4});
  const auto local = jd::select_window_local(grid, {-2.0, 2.0}, derivatives_of(jd::TestFunction(jd::TestFunctionId::kF2)), k, 0.15);
  ASSERT_EQ(local.size(), 4001u);
  const auto& centre = local[2000];
  EXPECT_NEAR(centre.x, 0.0, 1e-12);
  EXPECT_GT(centre.m, local.front().m);
  EXPECT_GT(centre.m, local.back().m);
}

TEST(SelectWindowLocal, DefiningMinimization) {
  const auto grid = grid_on(-4.0, 4.0, 1e-3);
  const auto k = jd::make_kernel({1, 5.0, 5.0, 4});
  const auto info = derivatives_of(jd::TestFunction(jd::TestFunctionId::kF1));
  const jd::Interval range{0.5, 0.52};
  const auto local = jd::select_window_local(grid, range, info, k, 0.15);
  const jd::LocalBudgetModel model(k, grid, info, 0.15);
  for (const auto& w : local) {
    const int m_hi = static_cast<int>(std::min(w.index, grid.count - 1 - w.index));
    for (int m = jd::default_m_min(k); m <= std::min(m_hi, 5000); ++m) {
      EXPECT_GE(model.budget(w.index, m).b_total, w.budget.b_total);
    }
  }
}

TEST(SelectWindowLocal, PositionIndependentBudgetGivesGlobalWindow) {
  const auto grid = grid_on(-4.0, 4.0, 1e-3);
  const auto k = jd::make_kernel({1, 5.0, 5.0, 4});
  const jd::DerivativeBounds bounds{5040.0, std::nullopt};  // x^7: constant seventh derivative
  const jd::Interval range{-2.0, 2.0};
  const int global = jd::select_window_global(grid, range, bounds, k, 0.15).m;
  for (const auto& w : jd::select_window_local(grid, range, bounds, k, 0.15)) EXPECT_EQ(w.m, global);
}

TEST(LocalBudget, NoiseFreeErrorWithinPointwiseBound) {
  const jd::TestFunction f2(jd::TestFunctionId::kF2);
  const double step = 1e-3;
  const auto sig = jd::synthesize(f2, -3.0, 3.0, step, jd::NoiseModel{});
  const auto grid = jd::SignalGrid::of(sig);
  for (int n : {1, 2}) {
    const auto k = jd::make_kernel({n, 5.0, 5.0, 4});
    const jd::LocalBudgetModel model(k, grid, derivatives_of(f2), 0.0);
    for (int m : {300, 442, 600}) {
      const auto est = jd::estimate_sampled(sig, k, m);
      for (std::size_t p = 0; p < est.values.size(); ++p) {
        if (std::abs(est.abscissas[p]) > 2.0 + 1e-9) continue;
        const auto b = model.budget(est.indices[p], m);
        const double err = std::abs(est.values[p] - f2.derivative(n, est.abscissas[p]));
        ASSERT_LE(err, b.b_bias + b.b_num) << "n=" << n << " m=" << m << " x=" << est.abscissas[p];
      }
    }
  }
}

TEST(ErrorBudget, JsonFields) {
  jd::ErrorBudget b;
  b.c3 = 1.5;
  b.branch = jd::Branch::kUltraspherical;
  const auto j = jd::to_json(b);
  for (const char* key : {"c_bias", "c3", "c4", "m_bound", "delta", "h_opt", "b_bias", "b_noise", "b_num", "b_total", "branch"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["branch"], "ultraspherical");
}
