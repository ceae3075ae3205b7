#pragma once

// Gauss-Jacobi rules and weighted integrals over [-1, 1].
//
// Every kernel in this library is w_{alpha,beta}(t) times a polynomial, so a
// Gauss rule built for the kernel's own weight integrates kernel moments
// exactly, including for alpha or beta in (-1, 0).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include <Eigen/Eigenvalues>

#include "jacdiff/error.hpp"
#include "jacdiff/jacobi.hpp"
#include "jacdiff/special.hpp"

namespace jacdiff {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// N-point Gauss rule for the weight (1-t)^alpha (1+t)^beta, by the
/// Golub-Welsch eigenvalue method on the Jacobi matrix.
inline GaussRule gauss_jacobi(int points, double alpha, double beta) {
  if (points < 1) throw ParameterError("gauss_jacobi: need at least one node");
  if (!(alpha > -1.0) || !(beta > -1.0)) {
    throw ParameterError("gauss_jacobi: parameters must exceed -1");
  }
  const double ab = alpha + beta;
  Eigen::VectorXd diag(points);
  Eigen::VectorXd sub(std::max(points - 1, 1));
  for (int k = 0; k < points; ++k) {
    const double s = 2.0 * k + ab;
    if (k == 0) {
      diag(k) = (beta - alpha) / (ab + 2.0);
    } else {
      diag(k) = (beta * beta - alpha * alpha) / (s * (s + 2.0));
    }
  }
  for (int k = 1; k < points; ++k) {
    const double s = 2.0 * k + ab;
    double b2 = 0.0;
    if (k == 1) {
      // (k + ab) cancels against (s - 1) at k = 1.
      b2 = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((ab + 2.0) * (ab + 2.0) * (ab + 3.0));
    } else {
      b2 = 4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
    }
    sub(k - 1) = std::sqrt(b2);
  }

  GaussRule rule;
  rule.nodes.resize(points);
  rule.weights.resize(points);
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + log_gamma(alpha + 1.0) +
                              log_gamma(beta + 1.0) - log_gamma(ab + 2.0));
  if (points == 1) {
    rule.nodes[0] = diag(0);
    rule.weights[0] = mu0;
    return rule;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw EvaluationError("gauss_jacobi: eigenvalue iteration did not converge");
  }
  // Newton steps on P_N polish the eigenvalues; weights then come from
  //   w_i = C / ((1 - t_i^2) P_N'(t_i)^2),  P_N' = (N+a+b+1)/2 P_{N-1}^{(a+1,b+1)}.
  const int n = points;
  const double log_c = (ab + 1.0) * std::log(2.0) + log_gamma(n + alpha + 1.0) +
                       log_gamma(n + beta + 1.0) - log_gamma(n + ab + 1.0) - log_gamma(n + 1.0);
  const double dscale = 0.5 * (n + ab + 1.0);
  for (int i = 0; i < points; ++i) {
    double t = std::clamp(solver.eigenvalues()(i), -1.0, 1.0);
    double dp = dscale * detail::jacobi_recurrence(n - 1, alpha + 1.0, beta + 1.0, t);
    for (int it = 0; it < 3; ++it) {
      const double step = detail::jacobi_recurrence(n, alpha, beta, t) / dp;
      const double next = t - step;
      if (!(std::abs(next) < 1.0) || std::abs(step) > 1e-6) break;
      t = next;
      dp = dscale * detail::jacobi_recurrence(n - 1, alpha + 1.0, beta + 1.0, t);
      if (std::abs(step) < 1e-17) break;
    }
    rule.nodes[i] = t;
    rule.weights[i] = std::exp(log_c - std::log1p(-t) - std::log1p(t)) / (dp * dp);
    if (!std::isfinite(rule.weights[i])) {
      const double v0 = solver.eigenvectors()(0, i);
      rule.weights[i] = mu0 * v0 * v0;
    }
  }
  return rule;
}

/// Memoized gauss_jacobi. Rules are immutable once built; safe to call from
/// several threads.
inline std::shared_ptr<const GaussRule> cached_gauss_jacobi(int points, double alpha,
                                                            double beta) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, std::shared_ptr<const GaussRule>> cache;
  const auto key = std::make_tuple(points, alpha, beta);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto rule = std::make_shared<const GaussRule>(gauss_jacobi(points, alpha, beta));
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(rule)).first->second;
}

inline std::shared_ptr<const GaussRule> cached_gauss_legendre(int points) {
  return cached_gauss_jacobi(points, 0.0, 0.0);
}

/// ∫_{-1}^{1} (1-t)^alpha (1+t)^beta g(t) dt for smooth g.
template <class G>
double integrate_weighted(double alpha, double beta, G&& g, int points = 64) {
  const auto rule = cached_gauss_jacobi(points, alpha, beta);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
    sum += rule->weights[i] * g(rule->nodes[i]);
  }
  return sum;
}

namespace detail {

template <class G>
double bisect_root(G& g, double lo, double hi, double g_lo) {
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g_mid = g(mid);
    if (g_mid == 0.0) return mid;
    if ((g_mid < 0.0) == (g_lo < 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// ∫_{-1}^{1} (1-t)^alpha (1+t)^beta |g(t)| dt for a smooth g whose sign
/// changes are resolvable on a grid of `scan_points` points.
///
/// The interval is split at the sign changes of g (and at `extra_breaks`);
/// each piece is integrated with a Gauss rule that carries whichever endpoint
/// singularity the piece touches, so accuracy does not degrade for
/// non-integer or negative exponents.
template <class G>
double abs_weighted_integral(double alpha, double beta, G&& g,
                             const std::vector<double>& extra_breaks = {},
                             int points = 64, int scan_points = 4001) {
  std::vector<double> breaks{-1.0, 1.0};
  double t_prev = -1.0;
  double g_prev = g(t_prev);
  for (int i = 1; i < scan_points; ++i) {
    const double t = -1.0 + 2.0 * i / (scan_points - 1);
    const double gt = g(t);
    if (gt == 0.0 && i + 1 < scan_points) {
      breaks.push_back(t);
    } else if (g_prev != 0.0 && gt != 0.0 && (gt < 0.0) != (g_prev < 0.0)) {
      breaks.push_back(detail::bisect_root(g, t_prev, t, g_prev));
    }
    t_prev = t;
    g_prev = gt;
  }
  for (double b : extra_breaks) {
    if (b > -1.0 && b < 1.0) breaks.push_back(b);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-14; }),
               breaks.end());

  auto w = [&](double t) { return std::pow(1.0 - t, alpha) * std::pow(1.0 + t, beta); };
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double lo = breaks[s];
    const double hi = breaks[s + 1];
    const double half = 0.5 * (hi - lo);
    double piece = 0.0;
    if (lo == -1.0 && hi == 1.0) {
      piece = integrate_weighted(alpha, beta, g, points);
    } else if (lo == -1.0) {
      // (1+t) = half (1+s): carry (1+s)^beta in the rule.
      const auto rule = cached_gauss_jacobi(points, 0.0, beta);
      for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
        const double t = lo + half * (rule->nodes[i] + 1.0);
        piece += rule->weights[i] * std::pow(1.0 - t, alpha) * g(t);
      }
      piece *= std::pow(half, beta + 1.0);
    } else if (hi == 1.0) {
      const auto rule = cached_gauss_jacobi(points, alpha, 0.0);
      for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
        const double t = lo + half * (rule->nodes[i] + 1.0);
        piece += rule->weights[i] * std::pow(1.0 + t, beta) * g(t);
      }
      piece *= std::pow(half, alpha + 1.0);
    } else {
      const auto rule = cached_gauss_legendre(points);
      for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
        const double t = lo + half * (rule->nodes[i] + 1.0);
        piece += rule->weights[i] * w(t) * g(t);
      }
      piece *= half;
    }
    total += std::abs(piece);
  }
  return total;
}

}  // namespace jacdiff
