#pragma once

// Jacobi polynomial primitives on [-1, 1].

#include <cmath>
#include <string>

#include "jacdiff/error.hpp"
#include "jacdiff/special.hpp"

namespace jacdiff {

/// Degree and parameters of one Jacobi polynomial P_degree^(alpha, beta).
struct JacobiIndex {
  int degree = 0;
  double alpha = 0.0;
  double beta = 0.0;
};

inline void validate(const JacobiIndex& idx) {
  if (idx.degree < 0) throw ParameterError("Jacobi degree must be non-negative");
  if (!(idx.alpha > -1.0) || !(idx.beta > -1.0)) {
    throw ParameterError("Jacobi parameters must satisfy alpha > -1 and beta > -1, got (" +
                         std::to_string(idx.alpha) + ", " + std::to_string(idx.beta) + ")");
  }
}

namespace detail {

// Three-term recurrence without range checks. Valid for any real t.
inline double jacobi_recurrence(int degree, double a, double b, double t) {
  if (degree == 0) return 1.0;
  double p_prev = 1.0;
  double p = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * t;
  const double ab = a + b;
  for (int k = 1; k < degree; ++k) {
    const double two_k_ab = 2.0 * k + ab;
    const double c1 = 2.0 * (k + 1) * (k + ab + 1.0) * two_k_ab;
    const double c2 = (two_k_ab + 1.0) * (a * a - b * b);
    const double c3 = two_k_ab * (two_k_ab + 1.0) * (two_k_ab + 2.0);
    const double c4 = 2.0 * (k + a) * (k + b) * (two_k_ab + 2.0);
    const double next = ((c2 + c3 * t) * p - c4 * p_prev) / c1;
    p_prev = p;
    p = next;
  }
  return p;
}

}  // namespace detail

/// Value of P_degree^(alpha, beta)(t) for |t| <= 1, by the three-term
/// recurrence in degree.
inline double jacobi_eval(const JacobiIndex& idx, double t) {
  validate(idx);
  if (!(std::abs(t) <= 1.0)) {
    throw DomainError("jacobi_eval: t must lie in [-1, 1], got " + std::to_string(t));
  }
  return detail::jacobi_recurrence(idx.degree, idx.alpha, idx.beta, t);
}

/// P_degree^(a, a)(0). Odd degrees vanish by symmetry and are returned as an
/// exact zero.
inline double ultraspherical_at_zero(int degree, double a) {
  if (degree % 2 == 1) return 0.0;
  return jacobi_eval({degree, a, a}, 0.0);
}

/// Weight (1-t)^alpha (1+t)^beta.
///
/// At an endpoint a zero exponent contributes a factor of 1 and a positive
/// exponent gives 0; a negative exponent throws SingularityError.
inline double weight(double alpha, double beta, double t) {
  if (!(std::abs(t) <= 1.0)) {
    throw DomainError("weight: t must lie in [-1, 1], got " + std::to_string(t));
  }
  auto factor = [](double base, double exponent) {
    if (exponent == 0.0) return 1.0;
    if (base == 0.0) {
      if (exponent < 0.0) {
        throw SingularityError("weight: negative exponent " + std::to_string(exponent) +
                               " at an endpoint");
      }
      return 0.0;
    }
    return std::pow(base, exponent);
  };
  return factor(1.0 - t, alpha) * factor(1.0 + t, beta);
}

/// Squared weighted L2 norm of P_i^(alpha, beta).
inline double jacobi_norm_sq(const JacobiIndex& idx) {
  validate(idx);
  const double a = idx.alpha;
  const double b = idx.beta;
  const int i = idx.degree;
  if (i == 0) {
    // 2^(a+b+1) B(a+1, b+1); the general form has a removable 0/0 at a+b = -1.
    return std::exp((a + b + 1.0) * std::log(2.0) + log_gamma(a + 1.0) + log_gamma(b + 1.0) -
                    log_gamma(a + b + 2.0));
  }
  const double log_ratio = log_gamma(a + i + 1.0) + log_gamma(b + i + 1.0) -
                           log_gamma(a + b + i + 1.0) - log_gamma(i + 1.0);
  return std::exp((a + b + 1.0) * std::log(2.0) + log_ratio) / (2.0 * i + a + b + 1.0);
}

}  // namespace jacdiff
