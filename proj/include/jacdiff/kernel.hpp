#pragma once

// Integration kernels for central differentiation-by-integration estimators.
//
// The minimal kernel of order n is
//
//   rho_{n,a,b}(t) = 2^{-(n+a+b+1)} n! / B(n+a+1, n+b+1) * P_n^{(a,b)}(t) w_{a,b}(t)
//
// and the affine kernel Q_{alpha,beta,n,q} is a finite combination of minimal
// kernels with shifted parameters (alpha+i-j, beta+j). A Kernel stores that
// combination in closed form and validates its own moments on construction.

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "jacdiff/error.hpp"
#include "jacdiff/jacobi.hpp"
#include "jacdiff/quadrature.hpp"
#include "jacdiff/special.hpp"

namespace jacdiff {

/// Full configuration of one estimator apart from the window length.
struct EstimatorParams {
  int n = 0;  ///< derivative order
  double alpha = 0.0;
  double beta = 0.0;
  int q = 0;  ///< truncation order of the Jacobi series

  bool symmetric() const noexcept { return alpha == beta; }
  /// alpha = beta with even q: kernel has parity (-1)^n and one extra
  /// vanishing moment.
  bool has_parity() const noexcept { return alpha == beta && q % 2 == 0; }
};

inline void validate(const EstimatorParams& p) {
  if (p.n < 0) throw ParameterError("derivative order n must be non-negative");
  if (p.q < 0) throw ParameterError("truncation order q must be non-negative");
  if (!(p.alpha > -1.0) || !(p.beta > -1.0)) {
    throw ParameterError("kernel parameters must satisfy alpha > -1 and beta > -1");
  }
  if (p.n + p.q > 48) throw ParameterError("n + q above 48 is not supported");
}

enum class KernelKind { kMinimal, kAffine };

inline const char* to_string(KernelKind kind) {
  return kind == KernelKind::kMinimal ? "minimal" : "affine";
}

/// One scaled minimal kernel coef * rho_{n, alpha, beta} inside a combination.
struct KernelTerm {
  double coef = 0.0;
  double alpha = 0.0;  ///< alpha_{i,j} = base alpha + shift_alpha
  double beta = 0.0;   ///< beta_j = base beta + shift_beta
  int shift_alpha = 0;
  int shift_beta = 0;
  double normalization = 0.0;  ///< 2^{-(n+a+b+1)} n! / B(n+a+1, n+b+1)
};

inline constexpr double kMomentTolerance = 1e-8;
inline constexpr int kAnalyticNodes = 128;

class Kernel;
Kernel assemble_kernel(const EstimatorParams& params, KernelKind kind,
                       std::vector<KernelTerm> terms, std::vector<double> basis);

class Kernel {
 public:
  const EstimatorParams& params() const noexcept { return params_; }
  KernelKind kind() const noexcept { return kind_; }
  int n() const noexcept { return params_.n; }
  int q() const noexcept { return params_.q; }
  const std::vector<KernelTerm>& terms() const noexcept { return terms_; }
  /// Entry m is ∫ k(t) t^m dt, m = 0..n+q+1, as verified at construction.
  const std::vector<double>& moment_certificate() const noexcept { return moments_; }

  /// Degree of the polynomial factor k(t) / w_{alpha,beta}(t).
  int polynomial_degree() const noexcept { return degree_; }

  /// Coefficients b_i of k(t) / w_{alpha,beta}(t) = Σ_i b_i P_{n+i}^{(alpha,beta)}(t)
  /// when known in closed form; empty for kernels built from arbitrary terms.
  const std::vector<double>& jacobi_coefficients() const noexcept { return basis_; }

  /// k(t) / w_{alpha,beta}(t); a polynomial, finite on all of [-1, 1].
  double smooth_part(double t) const {
    if (!basis_.empty()) return basis_sum(t);
    double sum = 0.0;
    const int n = params_.n;
    for (const auto& term : terms_) {
      double v = term.coef * term.normalization *
                 detail::jacobi_recurrence(n, term.alpha, term.beta, t);
      for (int s = 0; s < term.shift_alpha; ++s) v *= (1.0 - t);
      for (int s = 0; s < term.shift_beta; ++s) v *= (1.0 + t);
      sum += v;
    }
    return sum;
  }

  /// Kernel value on [-1, 1]. Throws SingularityError at an endpoint whose
  /// weight exponent is negative.
  double operator()(double t) const {
    return weight(params_.alpha, params_.beta, t) * smooth_part(t);
  }

  /// Gauss nodes and node weights folded with the smooth part: the kernel
  /// integral of g is Σ folded[i] * g(nodes[i]).
  const std::vector<double>& analytic_nodes() const noexcept { return rule_->nodes; }
  const std::vector<double>& analytic_weights() const noexcept { return folded_; }

 private:
  friend Kernel assemble_kernel(const EstimatorParams&, KernelKind, std::vector<KernelTerm>,
                                std::vector<double>);
  Kernel() = default;

  // Σ_i basis_[i] P_{n+i}(t), one pass of the three-term recurrence.
  double basis_sum(double t) const {
    const double a = params_.alpha, b = params_.beta, ab = a + b;
    const int top = params_.n + static_cast<int>(basis_.size()) - 1;
    double p_prev = 0.0, p = 1.0, sum = 0.0;
    for (int k = 0; k <= top; ++k) {
      if (k >= params_.n) sum += basis_[k - params_.n] * p;
      if (k == top) break;
      double next;
      if (k == 0) {
        next = 0.5 * (a - b) + 0.5 * (ab + 2.0) * t;
      } else {
        const double two_k_ab = 2.0 * k + ab;
        const double c1 = 2.0 * (k + 1) * (k + ab + 1.0) * two_k_ab;
        const double c2 = (two_k_ab + 1.0) * (a * a - b * b);
        const double c3 = two_k_ab * (two_k_ab + 1.0) * (two_k_ab + 2.0);
        const double c4 = 2.0 * (k + a) * (k + b) * (two_k_ab + 2.0);
        next = ((c2 + c3 * t) * p - c4 * p_prev) / c1;
      }
      p_prev = p;
      p = next;
    }
    return sum;
  }

  EstimatorParams params_;
  KernelKind kind_ = KernelKind::kMinimal;
  std::vector<KernelTerm> terms_;
  std::vector<double> basis_;
  std::vector<double> moments_;
  int degree_ = 0;
  std::shared_ptr<const GaussRule> rule_;
  std::vector<double> folded_;
};

/// ∫_{-1}^{1} k(t) t^m dt for m = 0..max_m.
inline std::vector<double> kernel_moments(const Kernel& k, int max_m) {
  if (max_m < 0) return {};
  const int degree = k.polynomial_degree() + max_m;
  const int points = std::max(16, degree / 2 + 4);
  const auto rule = cached_gauss_jacobi(points, k.params().alpha, k.params().beta);
  std::vector<double> moments(max_m + 1, 0.0);
  for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
    const double t = rule->nodes[i];
    const double base = rule->weights[i] * k.smooth_part(t);
    double tp = 1.0;
    for (int m = 0; m <= max_m; ++m) {
      moments[m] += base * tp;
      tp *= t;
    }
  }
  return moments;
}

namespace detail {

inline double rho_normalization(int n, double a, double b) {
  return std::exp(-(n + a + b + 1.0) * std::log(2.0) + std::log(factorial(n)) -
                  (log_gamma(n + a + 1.0) + log_gamma(n + b + 1.0) -
                   log_gamma(2.0 * n + a + b + 2.0)));
}

// (2i + a + b + 2n + 1) / (i + a + b + 2n + 1); exactly 1 at i = 0.
inline double affine_ratio(int i, const EstimatorParams& p) {
  if (i == 0) return 1.0;
  const double s = p.alpha + p.beta + 2.0 * p.n + 1.0;
  return (2.0 * i + s) / (i + s);
}

inline KernelTerm make_term(const EstimatorParams& p, double coef, int shift_a, int shift_b) {
  KernelTerm term;
  term.coef = coef;
  term.shift_alpha = shift_a;
  term.shift_beta = shift_b;
  term.alpha = p.alpha + shift_a;
  term.beta = p.beta + shift_b;
  term.normalization = rho_normalization(p.n, term.alpha, term.beta);
  return term;
}

// Closed-form Jacobi coefficients of the affine kernel: by the n-fold Rodrigues
// identity d^n/dt^n [w_{a+n,b+n} P_i^{(a+n,b+n)}] = (-2)^n (i+n)!/i! w_{a,b} P_{i+n}^{(a,b)},
//   b_i = P_i^{(a+n,b+n)}(0) 2^n (i+n)! / (i! ||P_i^{(a+n,b+n)}||^2).
// Evaluating in this basis avoids the cancellation of the shifted double sum.
inline std::vector<double> affine_basis(const EstimatorParams& p) {
  std::vector<double> basis(p.q + 1, 0.0);
  const double a = p.alpha + p.n, b = p.beta + p.n;
  for (int i = 0; i <= p.q; ++i) {
    const double p0 = (p.alpha == p.beta) ? ultraspherical_at_zero(i, a) : jacobi_eval({i, a, b}, 0.0);
    if (p0 == 0.0) continue;
    const double log_scale = p.n * std::log(2.0) + log_gamma(i + p.n + 1.0) - log_gamma(i + 1.0);
    basis[i] = p0 * std::exp(log_scale) / jacobi_norm_sq({i, a, b});
  }
  return basis;
}

inline void check_certificate(const Kernel& k) {
  const auto& p = k.params();
  const auto& mom = k.moment_certificate();
  const double nfact = factorial(p.n);
  std::ostringstream failures;
  bool ok = true;
  for (int m = 0; m <= p.n + p.q; ++m) {
    const double expected = (m == p.n) ? nfact : 0.0;
    if (!(std::abs(mom[m] - expected) <= kMomentTolerance)) {
      ok = false;
      failures << " m=" << m << " got " << mom[m] << " expected " << expected << ";";
    }
  }
  if (p.has_parity()) {
    const int m = p.n + p.q + 1;
    if (!(std::abs(mom[m]) <= kMomentTolerance)) {
      ok = false;
      failures << " parity moment m=" << m << " got " << mom[m] << ";";
    }
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "kernel (n=" << p.n << ", alpha=" << p.alpha << ", beta=" << p.beta
        << ", q=" << p.q << ") failed its moment certificate:" << failures.str();
    throw CertificateError(msg.str());
  }
}

}  // namespace detail

/// Builds a kernel from explicit terms and certifies it. The terms' shifts
/// must be relative to params.alpha / params.beta.
/// A non-empty basis gives the same polynomial in the Jacobi basis and is used
/// for evaluation.
inline Kernel assemble_kernel(const EstimatorParams& params, KernelKind kind,
                              std::vector<KernelTerm> terms, std::vector<double> basis = {}) {
  validate(params);
  Kernel k;
  k.params_ = params;
  k.kind_ = kind;
  k.terms_ = std::move(terms);
  k.basis_ = std::move(basis);
  int max_shift = 0;
  for (const auto& t : k.terms_) max_shift = std::max(max_shift, t.shift_alpha + t.shift_beta);
  if (!k.basis_.empty()) max_shift = std::max(max_shift, static_cast<int>(k.basis_.size()) - 1);
  k.degree_ = params.n + max_shift;
  k.moments_ = kernel_moments(k, params.n + params.q + 1);
  detail::check_certificate(k);
  k.rule_ = cached_gauss_jacobi(kAnalyticNodes, params.alpha, params.beta);
  k.folded_.resize(k.rule_->nodes.size());
  for (std::size_t i = 0; i < k.folded_.size(); ++i) {
    k.folded_[i] = k.rule_->weights[i] * k.smooth_part(k.rule_->nodes[i]);
  }
  return k;
}

/// Minimal kernel rho_{n, alpha, beta}.
inline Kernel make_rho(int n, double alpha, double beta) {
  const EstimatorParams p{n, alpha, beta, 0};
  validate(p);
  return assemble_kernel(p, KernelKind::kMinimal, {detail::make_term(p, 1.0, 0, 0)},
                         detail::affine_basis(p));
}

/// Affine kernel Q_{alpha,beta,n,q}: the full double sum over i = 0..q,
/// j = 0..i.
inline Kernel make_affine_q(const EstimatorParams& params) {
  validate(params);
  std::vector<KernelTerm> terms;
  for (int i = 0; i <= params.q; ++i) {
    const double p_at_zero =
        jacobi_eval({i, params.alpha + params.n, params.beta + params.n}, 0.0);
    const double ratio = detail::affine_ratio(i, params);
    for (int j = 0; j <= i; ++j) {
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      terms.push_back(
          detail::make_term(params, p_at_zero * sign * binomial(i, j) * ratio, i - j, j));
    }
  }
  return assemble_kernel(params, KernelKind::kAffine, std::move(terms), detail::affine_basis(params));
}

/// Ultraspherical affine kernel (alpha = beta, even q), summing only the
/// even-index terms since P_odd^{(a,a)}(0) = 0.
inline Kernel make_ultraspherical_q(int n, double alpha, int q) {
  if (q < 0 || q % 2 != 0) {
    throw ParameterError("make_ultraspherical_q requires an even non-negative q (got " +
                         std::to_string(q) + "); use make_affine_q for odd q");
  }
  const EstimatorParams params{n, alpha, alpha, q};
  validate(params);
  std::vector<KernelTerm> terms;
  for (int half = 0; half <= q / 2; ++half) {
    const int i = 2 * half;
    const double p_at_zero = ultraspherical_at_zero(i, alpha + n);
    const double ratio = detail::affine_ratio(i, params);
    for (int j = 0; j <= i; ++j) {
      const double sign = (j % 2 == 0) ? 1.0 : -1.0;
      terms.push_back(
          detail::make_term(params, p_at_zero * sign * binomial(i, j) * ratio, i - j, j));
    }
  }
  return assemble_kernel(params, KernelKind::kAffine, std::move(terms), detail::affine_basis(params));
}

/// Ultraspherical form when it applies, full double sum otherwise.
inline Kernel make_kernel(const EstimatorParams& params) {
  if (params.has_parity()) return make_ultraspherical_q(params.n, params.alpha, params.q);
  return make_affine_q(params);
}

/// Σ_i P_i^{(alpha+n,beta+n)}(0) (2i+alpha+beta+2n+1)/(i+alpha+beta+2n+1)
///     Σ_j (-1)^{i+j} C(i,j); equals 1 for every admissible parameter set.
inline double affine_coefficient_sum(const EstimatorParams& params) {
  validate(params);
  double total = 0.0;
  for (int i = 0; i <= params.q; ++i) {
    const double p_at_zero =
        jacobi_eval({i, params.alpha + params.n, params.beta + params.n}, 0.0);
    double inner = 0.0;
    for (int j = 0; j <= i; ++j) {
      inner += (((i + j) % 2 == 0) ? 1.0 : -1.0) * binomial(i, j);
    }
    total += p_at_zero * detail::affine_ratio(i, params) * inner;
  }
  return total;
}

}  // namespace jacdiff
