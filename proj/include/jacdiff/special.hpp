#pragma once

#include <cmath>
#include <string>

#include "jacdiff/error.hpp"

namespace jacdiff {

/// ln Γ(x) for x > 0.
///
/// Backed by the C library lgamma; the reentrant variant is used where
/// available so concurrent callers do not race on the global sign flag.
inline double log_gamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError("log_gamma: argument must be finite and positive, got " +
                      std::to_string(x));
  }
#if defined(__GLIBC__) || defined(__APPLE__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

/// Euler beta function B(a, b) = Γ(a)Γ(b)/Γ(a+b).
inline double beta_fn(double a, double b) {
  return std::exp(log_gamma(a) + log_gamma(b) - log_gamma(a + b));
}

/// Binomial coefficient C(n, k) for small non-negative integers, exact in
/// double up to n = 50.
inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (k > n - k) k = n - k;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(r);
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace jacdiff
