// Picks a window for a noisy signal from a derivative bound and prints the
// error budget next to the observed error.

#include <cmath>
#include <cstdio>

#include "jacdiff/jacdiff.hpp"

int main() {
  const jacdiff::TestFunction f = jacdiff::TestFunction::parse("f2");
  const double delta = 0.15;
  const auto sig = jacdiff::synthesize(f, -4.0, 4.0, 1e-3, jacdiff::NoiseModel::from_delta(delta, 1));
  const auto grid = jacdiff::SignalGrid::of(sig);
  const jacdiff::Interval range{-2.0, 2.0};

  for (int n : {1, 2}) {
    const jacdiff::Kernel k = jacdiff::make_kernel({n, 5.0, 5.0, 4});
    const jacdiff::DerivativeFn deriv = [&](int order, double x) { return f.derivative(order, x); };
    const auto choice = jacdiff::select_window_global(grid, range, deriv, k, delta);
    const auto est = jacdiff::estimate_sampled(sig, k, choice.m);

    double worst = 0.0;
    for (std::size_t i = 0; i < est.values.size(); ++i) {
      const double x = est.abscissas[i];
      if (x < range.lo || x > range.hi) continue;
      worst = std::max(worst, std::abs(est.values[i] - f.derivative(n, x)));
    }
    const auto& b = choice.budget;
    std::printf("n = %d: m = %d  bias %.4f  noise %.4f  trapezoid %.2e  total %.4f  observed %.4f\n", n,
                choice.m, b.b_bias, b.b_noise, b.b_num, b.b_total, worst);
  }
}
