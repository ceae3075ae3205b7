#pragma once

// Applying kernels: analytic quadrature on callables and discrete
// convolution on uniformly sampled signals.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jacdiff/error.hpp"
#include "jacdiff/kernel.hpp"

namespace jacdiff {

/// Uniformly sampled data: values[i] is the sample at origin + i * step.
struct SampledSignal {
  double origin = 0.0;
  double step = 1.0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double abscissa(std::size_t i) const noexcept {
    return origin + static_cast<double>(i) * step;
  }
  double last_abscissa() const noexcept { return abscissa(values.size() - 1); }
};

inline void validate(const SampledSignal& sig) {
  if (!(sig.step > 0.0) || !std::isfinite(sig.step)) {
    throw ParameterError("signal step must be positive and finite");
  }
  if (sig.values.size() < 3) throw ParameterError("signal needs at least 3 samples");
}

/// Error-bound components attached to one estimate.
struct PointBounds {
  double b_bias = 0.0;
  double b_noise = 0.0;
  double b_num = 0.0;
  double b_total = 0.0;
};

/// Estimates of the n-th derivative at the sample points whose window fits
/// inside the data.
struct EstimateSeries {
  std::vector<std::size_t> indices;  ///< sample index of each estimate
  std::vector<double> abscissas;
  std::vector<double> values;
  double half_window = 0.0;  ///< h; the largest h_i when windows vary
  EstimatorParams params;
  std::vector<int> windows;       ///< per-point m_i; empty for a single global m
  std::vector<PointBounds> bounds;  ///< per-point bounds; may be empty
};

/// (1/h^n) ∫_{-1}^{1} k(t) f(x + h t) dt by Gauss quadrature matched to the
/// kernel's weight.
template <class F>
double estimate_analytic(F&& f, double x, double h, const Kernel& k) {
  if (!(h > 0.0)) throw ParameterError("estimate_analytic: h must be positive");
  const auto& nodes = k.analytic_nodes();
  const auto& weights = k.analytic_weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double fx = f(x + h * nodes[i]);
    if (!std::isfinite(fx)) {
      throw EvaluationError("estimate_analytic: non-finite f(" +
                            std::to_string(x + h * nodes[i]) + ")");
    }
    sum += weights[i] * fx;
  }
  return sum / std::pow(h, k.n());
}

/// Trapezoid weights w_j, j = -m..m, with h = m * step:
///   w_j = (1/h^n) (1/m) c_j k(j/m),   c_{±m} = 1/2, otherwise 1.
inline std::vector<double> discrete_weights(const Kernel& k, int m, double step) {
  const auto& p = k.params();
  if (p.alpha < 0.0 || p.beta < 0.0) {
    throw ParameterError(
        "discrete_weights: trapezoid discretization needs alpha, beta >= 0 "
        "(kernel is unbounded at the window edge)");
  }
  if (m < p.n + p.q + 1) {
    throw ParameterError("discrete_weights: m must be at least n + q + 1 = " +
                         std::to_string(p.n + p.q + 1) + ", got " + std::to_string(m));
  }
  if (!(step > 0.0)) throw ParameterError("discrete_weights: step must be positive");
  const double h = m * step;
  const double scale = 1.0 / (std::pow(h, p.n) * m);
  std::vector<double> w(2 * static_cast<std::size_t>(m) + 1);
  if (p.alpha == p.beta) {
    // k(-t) = (-1)^n k(t)
    const double sign = (p.n % 2 == 0) ? 1.0 : -1.0;
    for (int j = 0; j <= m; ++j) {
      const double c = (j == m) ? 0.5 : 1.0;
      w[m + j] = (j == 0 && sign < 0.0) ? 0.0 : scale * c * k(static_cast<double>(j) / m);
      w[m - j] = sign * w[m + j];
    }
    return w;
  }
  for (int j = -m; j <= m; ++j) {
    const double c = (j == -m || j == m) ? 0.5 : 1.0;
    w[j + m] = scale * c * k(static_cast<double>(j) / m);
  }
  return w;
}

namespace detail {

// Fixed summation order j = -m..m so results do not depend on scheduling.
inline double convolve_at(std::span<const double> values, std::span<const double> weights,
                          std::size_t center) {
  const std::size_t m = weights.size() / 2;
  const double* x = values.data() + (center - m);
  double sum = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) sum += weights[j] * x[j];
  return sum;
}

inline void require_length(const SampledSignal& sig, int m) {
  const std::size_t need = 2 * static_cast<std::size_t>(m) + 1;
  if (sig.size() < need) {
    throw WindowError("signal has " + std::to_string(sig.size()) +
                      " samples; window m=" + std::to_string(m) + " needs at least " +
                      std::to_string(need));
  }
}

}  // namespace detail

/// Discrete estimator at every index i with m <= i <= N-1-m.
inline EstimateSeries estimate_sampled(const SampledSignal& sig, const Kernel& k, int m) {
  validate(sig);
  if (m < 1) throw ParameterError("estimate_sampled: m must be positive");
  detail::require_length(sig, m);
  const auto w = discrete_weights(k, m, sig.step);
  EstimateSeries out;
  out.params = k.params();
  out.half_window = m * sig.step;
  const std::size_t first = static_cast<std::size_t>(m);
  const std::size_t last = sig.size() - 1 - first;
  out.indices.reserve(last - first + 1);
  for (std::size_t i = first; i <= last; ++i) {
    out.indices.push_back(i);
    out.abscissas.push_back(sig.abscissa(i));
    out.values.push_back(detail::convolve_at(sig.values, w, i));
  }
  return out;
}

/// Discrete estimator with a separate window m_i at each listed index.
inline EstimateSeries estimate_sampled_varying(const SampledSignal& sig, const Kernel& k,
                                               std::span<const std::size_t> indices,
                                               std::span<const int> windows) {
  validate(sig);
  if (indices.size() != windows.size()) {
    throw ParameterError("estimate_sampled_varying: one window per index required");
  }
  std::map<int, std::vector<double>> cache;
  EstimateSeries out;
  out.params = k.params();
  for (std::size_t p = 0; p < indices.size(); ++p) {
    const std::size_t i = indices[p];
    const int m = windows[p];
    if (m < 1 || i < static_cast<std::size_t>(m) || i + m >= sig.size()) {
      throw WindowError("window m=" + std::to_string(m) + " at index " + std::to_string(i) +
                        " does not fit inside the signal");
    }
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, discrete_weights(k, m, sig.step)).first;
    out.indices.push_back(i);
    out.abscissas.push_back(sig.abscissa(i));
    out.values.push_back(detail::convolve_at(sig.values, it->second, i));
    out.windows.push_back(m);
    out.half_window = std::max(out.half_window, m * sig.step);
  }
  return out;
}

/// Same computation as estimate_sampled, restricted to kernels with parity.
/// At a point where only one-sided n-th derivatives exist the estimate tends
/// to their average as h -> 0.
inline EstimateSeries estimate_generalized(const SampledSignal& sig, const Kernel& k, int m) {
  if (!k.params().has_parity()) {
    throw ParameterError(
        "estimate_generalized needs an ultraspherical kernel (alpha = beta) with even q");
  }
  return estimate_sampled(sig, k, m);
}

/// Both sides of D^{(n)}_{h,a,b} f(x) = D^{(0)}_{h,a+n,b+n} f^{(n)}(x),
/// each computed independently.
template <class F, class Fn>
std::pair<double, double> minimal_vs_zero_order_identity(F&& f, Fn&& f_n, double x, double h,
                                                         int n, double alpha, double beta) {
  const double left = estimate_analytic(f, x, h, make_rho(n, alpha, beta));
  const double right = estimate_analytic(f_n, x, h, make_rho(0, alpha + n, beta + n));
  return {left, right};
}

/// (direct, combined): the affine kernel applied to f, and the same estimate
/// assembled as a weighted sum of minimal estimators with shifted parameters.
template <class F>
std::pair<double, double> affine_combination_identity(F&& f, double x, double h,
                                                      const EstimatorParams& params) {
  const double direct = estimate_analytic(f, x, h, make_affine_q(params));
  double combined = 0.0;
  for (int i = 0; i <= params.q; ++i) {
    const double p_at_zero =
        jacobi_eval({i, params.alpha + params.n, params.beta + params.n}, 0.0);
    if (p_at_zero == 0.0) continue;
    const double ratio = detail::affine_ratio(i, params);
    for (int j = 0; j <= i; ++j) {
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      const double coef = p_at_zero * ratio * sign * binomial(i, j);
      combined += coef * estimate_analytic(
                             f, x, h, make_rho(params.n, params.alpha + i - j, params.beta + j));
    }
  }
  return {direct, combined};
}

}  // namespace jacdiff
