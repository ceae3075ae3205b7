// First derivative of a noisy sine with a fixed window.

#include <cmath>
#include <cstdio>

#include "jacdiff/jacdiff.hpp"

int main() {
  const jacdiff::Kernel k = jacdiff::make_kernel({1, 5.0, 5.0, 4});
  const auto sig = jacdiff::synthesize([](double x) { return std::sin(3.0 * x); }, -2.0, 2.0, 1e-3,
                                       jacdiff::NoiseModel{0.01, 42});
  const int m = 300;
  const auto est = jacdiff::estimate_sampled(sig, k, m);

  double worst = 0.0;
  for (std::size_t i = 0; i < est.values.size(); ++i) {
    worst = std::max(worst, std::abs(est.values[i] - 3.0 * std::cos(3.0 * est.abscissas[i])));
  }
  std::printf("h = %.3f, %zu estimates, max error %.4f\n", est.half_window, est.values.size(), worst);
  for (std::size_t i = 0; i < est.values.size(); i += 500) {
    std::printf("  x = %+.3f  estimate %+.5f  exact %+.5f\n", est.abscissas[i], est.values[i],
                3.0 * std::cos(3.0 * est.abscissas[i]));
  }
}
