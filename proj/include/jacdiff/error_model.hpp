#pragma once

// Error constants and bounds for the affine estimators, and window-length
// selection by minimizing the total bound
//
//   B_total(m) = B_bias(h) + B_noise(h) + B_num(m),   h = m * T_s.
//
// Two branches exist. The general branch bounds the bias by c_bias h^{q+1}
// using sup |f^{(n+q+1)}|; when alpha = beta and q is even the parity of the
// kernel lifts this to c_bias h^{q+2} with sup |f^{(n+q+2)}|.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jacdiff/error.hpp"
#include "jacdiff/estimator.hpp"
#include "jacdiff/kernel.hpp"
#include "jacdiff/quadrature.hpp"
#include "jacdiff/special.hpp"

namespace jacdiff {

enum class Branch { kGeneral, kUltraspherical };

inline const char* to_string(Branch b) {
  return b == Branch::kGeneral ? "general" : "ultraspherical";
}

inline Branch branch_of(const Kernel& k) {
  return k.params().has_parity() ? Branch::kUltraspherical : Branch::kGeneral;
}

/// Power of h in the bias bound: q+1, or q+2 on the ultraspherical branch.
inline int bias_order(int q, Branch b) { return b == Branch::kUltraspherical ? q + 2 : q + 1; }

/// Order of the derivative whose sup enters the bias bound.
inline int bound_derivative_order(const Kernel& k) {
  return k.n() + bias_order(k.q(), branch_of(k));
}

struct ErrorBudget {
  double c_bias = 0.0;  ///< C2 (general) or its ultraspherical counterpart
  double c3 = 0.0;      ///< ∫ |Q|
  double c4 = 0.0;      ///< ∫ |t^{n+q+2} Q|
  double m_bound = 0.0;
  double delta = 0.0;
  double b_bias = 0.0;
  double b_noise = 0.0;
  double b_num = 0.0;
  double b_total = 0.0;
  double h_opt = 0.0;
  Branch branch = Branch::kGeneral;
};

namespace detail {

template <class G>
double abs_kernel_integral(const Kernel& k, G&& factor, bool break_at_zero) {
  const auto& p = k.params();
  auto g = [&](double t) { return k.smooth_part(t) * factor(t); };
  std::vector<double> extra;
  if (break_at_zero) extra.push_back(0.0);
  const int points = std::max(64, k.polynomial_degree() + 32);
  return abs_weighted_integral(p.alpha, p.beta, g, extra, points);
}

inline double abs_moment(const Kernel& k, int exponent) {
  return abs_kernel_integral(
      k, [exponent](double t) { return std::pow(t, exponent); }, exponent > 0);
}

}  // namespace detail

/// C3 = ∫_{-1}^{1} |k(t)| dt, the noise amplification constant.
inline double compute_c3(const Kernel& k) { return detail::abs_moment(k, 0); }

/// C4 = ∫_{-1}^{1} |t^{n+q+2} k(t)| dt.
inline double compute_c4(const Kernel& k) { return detail::abs_moment(k, k.n() + k.q() + 2); }

/// M / e! * ∫ |t^e k(t)| dt with e the branch's bound-derivative order.
/// Applied to a minimal kernel this gives the q = 0 constants of both branches.
inline double compute_c_bias_constant(const Kernel& k, double m_bound) {
  if (!(m_bound > 0.0) || !std::isfinite(m_bound)) {
    throw ParameterError("derivative bound must be positive and finite");
  }
  const int e = bound_derivative_order(k);
  return m_bound / factorial(e) * detail::abs_moment(k, e);
}

inline double bound_bias(double c_bias, double h, int q, Branch branch) {
  if (!(h > 0.0)) throw ParameterError("bound_bias: h must be positive");
  return c_bias * std::pow(h, bias_order(q, branch));
}

inline double bound_noise(double c3, double delta, double h, int n) {
  if (!(h > 0.0)) throw ParameterError("bound_noise: h must be positive");
  if (delta < 0.0) throw ParameterError("bound_noise: delta must be non-negative");
  return c3 * delta / std::pow(h, n);
}

/// Composite trapezoid constant 2^3 / (12 (2m)^2) over [-1, 1] with 2m panels.
inline double trapezoid_factor(int m) {
  return 8.0 / (12.0 * 4.0 * static_cast<double>(m) * static_cast<double>(m));
}

/// Kernel samples on a fixed t-grid, reused to bound the trapezoid error of
/// t -> k(t) f(x + h t) for many (f, x, h).
///
/// The second derivative is taken by central differences with step fd_step at
/// each grid point whose stencil stays inside [-1, 1].
class TrapezoidErrorModel {
 public:
  explicit TrapezoidErrorModel(const Kernel& k, int grid_points = 2001, double fd_step = 1e-4)
      : fd_step_(fd_step) {
    if (grid_points < 5) throw ParameterError("trapezoid grid needs at least 5 points");
    for (int i = 0; i < grid_points; ++i) {
      const double t = -1.0 + 2.0 * i / (grid_points - 1);
      if (t - fd_step < -1.0 || t + fd_step > 1.0) continue;
      t_.push_back(t);
      k_minus_.push_back(k(t - fd_step));
      k_mid_.push_back(k(t));
      k_plus_.push_back(k(t + fd_step));
    }
    if (t_.size() < 5) {
      throw EvaluationError("trapezoid error model: fewer than 5 evaluable grid points");
    }
    const double d2 = fd_step * fd_step;
    for (std::size_t i = 0; i < t_.size(); ++i) {
      sup_[0] = std::max(sup_[0], std::abs(k_mid_[i]));
      sup_[1] = std::max(sup_[1], std::abs((k_plus_[i] - k_minus_[i]) / (2.0 * fd_step)));
      sup_[2] = std::max(sup_[2], std::abs((k_plus_[i] - 2.0 * k_mid_[i] + k_minus_[i]) / d2));
    }
  }

  /// Grid sup of |d²/dt² [k(t) f(x + h t)]|.
  template <class F>
  double sup_second_derivative(F&& f, double x, double h) const {
    const double d2 = fd_step_ * fd_step_;
    double sup = 0.0;
    std::size_t usable = 0;
    for (std::size_t i = 0; i < t_.size(); ++i) {
      const double gm = k_minus_[i] * f(x + h * (t_[i] - fd_step_));
      const double g0 = k_mid_[i] * f(x + h * t_[i]);
      const double gp = k_plus_[i] * f(x + h * (t_[i] + fd_step_));
      const double second = (gp - 2.0 * g0 + gm) / d2;
      if (!std::isfinite(second)) continue;
      ++usable;
      sup = std::max(sup, std::abs(second));
    }
    if (usable < 5) {
      throw EvaluationError("bound_numerical: fewer than 5 evaluable grid points");
    }
    return sup;
  }

  template <class F>
  double bound(F&& f, double x, double h, int m) const {
    return trapezoid_factor(m) * sup_second_derivative(f, x, h);
  }

  /// Grid sup of |k^{(order)}|, order 0..2.
  double kernel_derivative_sup(int order) const { return sup_.at(order); }

 private:
  double fd_step_;
  std::vector<double> t_, k_minus_, k_mid_, k_plus_;
  std::array<double, 3> sup_{0.0, 0.0, 0.0};
};

/// Trapezoid error bound (8 / (12 (2m)^2)) sup_t |(k(t) f(x+ht))''| on a
/// 2001-point grid. A grid estimate of the sup, not a certified bound.
template <class F>
double bound_numerical(const Kernel& k, F&& f, double x, double h, int m) {
  if (m < 1) throw ParameterError("bound_numerical: m must be positive");
  return TrapezoidErrorModel(k).bound(f, x, h, m);
}

struct OptimalWindow {
  double h = 0.0;
  double psi = 0.0;  ///< c_bias h^r + c3 delta / h^n at the minimizer
};

/// Closed-form minimizer of psi(h) = c_bias h^r + c3 delta / h^n, with r the
/// branch's bias order:  h = [n c3 delta / (r c_bias)]^{1/(n+r)}.
///
/// Returns nullopt when no positive finite minimizer exists (delta = 0 or
/// n = 0); the caller should then work in pure-bias mode.
inline std::optional<OptimalWindow> optimal_h(double c_bias, double c3, double delta, int n,
                                              int q, Branch branch) {
  if (!(c_bias > 0.0) || !(c3 > 0.0)) {
    throw ParameterError("optimal_h: constants must be positive");
  }
  if (delta < 0.0) throw ParameterError("optimal_h: delta must be non-negative");
  if (delta == 0.0 || n == 0) return std::nullopt;
  const int r = bias_order(q, branch);
  OptimalWindow out;
  out.h = std::pow(n * c3 * delta / (r * c_bias), 1.0 / (n + r));
  out.psi = c_bias * std::pow(out.h, r) + c3 * delta / std::pow(out.h, n);
  return out;
}

// ---------------------------------------------------------------------------
// Window selection

/// Analytic derivatives: derivative(k, x) = f^{(k)}(x).
using DerivativeFn = std::function<double(int, double)>;

/// Caller-supplied bounds when f is unknown. f_sup holds sup |f|, |f'|, |f''|
/// over the data; without it the trapezoid term is omitted (b_num = 0).
struct DerivativeBounds {
  double m_bound = 0.0;
  std::optional<std::array<double, 3>> f_sup;
};

using DerivativeInfo = std::variant<DerivativeFn, DerivativeBounds>;

struct SignalGrid {
  double origin = 0.0;
  double step = 1.0;
  std::size_t count = 0;

  static SignalGrid of(const SampledSignal& s) { return {s.origin, s.step, s.size()}; }
  double at(std::size_t i) const noexcept { return origin + static_cast<double>(i) * step; }
  double last() const noexcept { return at(count - 1); }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct WindowOptions {
  int m_min = 0;             ///< 0: 4 (n + q + 2)
  int m_max = 5000;          ///< hard cap; the data extent may lower it
  int x_grid = 41;           ///< evaluation points for the global trapezoid sup
  int m_bound_grid = 10001;  ///< grid for sup |f^{(e)}| on the widened interval
};

struct WindowChoice {
  int m = 0;
  ErrorBudget budget;
};

struct LocalWindow {
  std::size_t index = 0;
  double x = 0.0;
  int m = 0;
  ErrorBudget budget;
};

inline int default_m_min(const Kernel& k) {
  return std::max(4 * (k.n() + k.q() + 2), k.n() + k.q() + 1);
}

namespace detail {

inline std::size_t first_index_at_or_after(const SignalGrid& g, double x) {
  const double r = (x - g.origin) / g.step;
  const double c = std::ceil(r - 1e-9);
  return c <= 0.0 ? 0 : static_cast<std::size_t>(c);
}

inline std::size_t last_index_at_or_before(const SignalGrid& g, double x) {
  const double r = (x - g.origin) / g.step;
  const double f = std::floor(r + 1e-9);
  return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(g.count - 1)));
}

template <class F>
double grid_sup(F&& f, double lo, double hi, int points) {
  double sup = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
    const double v = std::abs(f(x));
    if (!std::isfinite(v)) throw EvaluationError("derivative is not finite at " + std::to_string(x));
    sup = std::max(sup, v);
  }
  return sup;
}

struct KernelConstants {
  double c3 = 0.0;
  double c4 = 0.0;
  double abs_e = 0.0;  // ∫ |t^e k|
  int e = 0;
  Branch branch = Branch::kGeneral;
};

inline KernelConstants kernel_constants(const Kernel& k) {
  KernelConstants c;
  c.branch = branch_of(k);
  c.e = bound_derivative_order(k);
  c.c3 = compute_c3(k);
  c.c4 = compute_c4(k);
  c.abs_e = (c.e == k.n() + k.q() + 2) ? c.c4 : abs_moment(k, c.e);
  return c;
}

inline void finish_budget(ErrorBudget& b) { b.b_total = b.b_bias + b.b_noise + b.b_num; }

// O(1) range maximum over a fixed array.
class RangeMax {
 public:
  RangeMax() = default;
  explicit RangeMax(std::vector<double> v) {
    levels_.push_back(std::move(v));
    const std::size_t n = levels_[0].size();
    for (std::size_t w = 1; 2 * w <= n; w *= 2) {
      const auto& prev = levels_.back();
      std::vector<double> next(n - 2 * w + 1);
      for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::max(prev[i], prev[i + w]);
      levels_.push_back(std::move(next));
    }
  }
  /// max over [lo, hi], inclusive.
  double query(std::size_t lo, std::size_t hi) const {
    const std::size_t len = hi - lo + 1;
    std::size_t level = 0;
    while ((std::size_t{2} << level) <= len) ++level;
    return std::max(levels_[level][lo], levels_[level][hi + 1 - (std::size_t{1} << level)]);
  }

 private:
  std::vector<std::vector<double>> levels_;
};

}  // namespace detail

/// Inclusive scan range [m_min, m_max] for windows centred anywhere in
/// `range`. Throws ParameterError when empty.
inline std::pair<int, int> window_scan_range(const SignalGrid& grid, const Interval& range,
                                             const Kernel& k, const WindowOptions& opt) {
  if (!(grid.step > 0.0) || grid.count < 3) throw ParameterError("invalid signal grid");
  if (!(range.hi >= range.lo)) throw ParameterError("evaluation range is empty");
  const int m_min = opt.m_min > 0 ? opt.m_min : default_m_min(k);
  const double left = (range.lo - grid.origin) / grid.step;
  const double right = (grid.last() - range.hi) / grid.step;
  const double data_limit = std::floor(std::min(left, right) + 1e-9);
  long long m_max = std::min<long long>(opt.m_max, static_cast<long long>((grid.count - 1) / 2));
  m_max = std::min<long long>(m_max, data_limit < 0 ? -1 : static_cast<long long>(data_limit));
  if (m_max < m_min) {
    throw ParameterError("window scan range is empty: m_min=" + std::to_string(m_min) +
                         ", m_max=" + std::to_string(m_max));
  }
  return {m_min, static_cast<int>(m_max)};
}

/// Global budget for one window m: derivative bound taken over the
/// evaluation range widened by h / (e + 1) on each side, trapezoid term as
/// the largest bound over `opt.x_grid` points of the range.
class GlobalBudgetModel {
 public:
  GlobalBudgetModel(const Kernel& k, DerivativeInfo info, const Interval& range, double step,
                    double delta, const WindowOptions& opt = {})
      : kernel_(k),
        info_(std::move(info)),
        range_(range),
        step_(step),
        delta_(delta),
        opt_(opt),
        consts_(detail::kernel_constants(k)),
        trapezoid_(k) {
    if (delta < 0.0) throw ParameterError("delta must be non-negative");
    if (auto* fn = std::get_if<DerivativeFn>(&info_)) {
      const int e = consts_.e;
      core_m_bound_ = detail::grid_sup([&](double x) { return (*fn)(e, x); }, range.lo,
                                       range.hi, opt.m_bound_grid);
    } else {
      const auto& b = std::get<DerivativeBounds>(info_);
      if (!(b.m_bound > 0.0)) throw ParameterError("a positive derivative bound is required");
      core_m_bound_ = b.m_bound;
    }
  }

  /// Lower bound on b_total(m) that needs no widened-interval search and no
  /// trapezoid term.
  double lower_bound(int m) const {
    const double h = m * step_;
    return core_m_bound_ / factorial(consts_.e) * consts_.abs_e *
               std::pow(h, bias_order(kernel_.q(), consts_.branch)) +
           consts_.c3 * delta_ / std::pow(h, kernel_.n());
  }

  double m_bound(int m) const {
    if (auto* fn = std::get_if<DerivativeFn>(&info_)) {
      const double h = m * step_;
      const double widen = h / (consts_.e + 1);
      const int e = consts_.e;
      return std::max(core_m_bound_,
                      detail::grid_sup([&](double x) { return (*fn)(e, x); }, range_.lo - widen,
                                       range_.hi + widen, opt_.m_bound_grid));
    }
    return core_m_bound_;
  }

  double trapezoid_term(int m) const {
    const double h = m * step_;
    if (auto* fn = std::get_if<DerivativeFn>(&info_)) {
      auto f = [&](double x) { return (*fn)(0, x); };
      double sup = 0.0;
      const int points = std::max(1, opt_.x_grid);
      for (int i = 0; i < points; ++i) {
        const double x =
            points == 1 ? range_.lo : range_.lo + (range_.hi - range_.lo) * i / (points - 1);
        sup = std::max(sup, trapezoid_.sup_second_derivative(f, x, h));
      }
      return trapezoid_factor(m) * sup;
    }
    const auto& b = std::get<DerivativeBounds>(info_);
    if (!b.f_sup) return 0.0;
    const auto& s = *b.f_sup;
    return trapezoid_factor(m) * (trapezoid_.kernel_derivative_sup(2) * s[0] +
                                  2.0 * h * trapezoid_.kernel_derivative_sup(1) * s[1] +
                                  h * h * trapezoid_.kernel_derivative_sup(0) * s[2]);
  }

  ErrorBudget budget(int m) const {
    const double h = m * step_;
    ErrorBudget b;
    b.branch = consts_.branch;
    b.c3 = consts_.c3;
    b.c4 = consts_.c4;
    b.delta = delta_;
    b.m_bound = m_bound(m);
    b.c_bias = b.m_bound / factorial(consts_.e) * consts_.abs_e;
    b.b_bias = bound_bias(b.c_bias, h, kernel_.q(), b.branch);
    b.b_noise = bound_noise(b.c3, delta_, h, kernel_.n());
    b.b_num = trapezoid_term(m);
    b.h_opt = h;
    detail::finish_budget(b);
    return b;
  }

 private:
  const Kernel& kernel_;
  DerivativeInfo info_;
  Interval range_;
  double step_;
  double delta_;
  WindowOptions opt_;
  detail::KernelConstants consts_;
  TrapezoidErrorModel trapezoid_;
  double core_m_bound_ = 0.0;
};

/// The integer m in the scan range minimizing the global B_total(m); ties go
/// to the smaller m. Candidates are visited in order of a cheap lower bound
/// so the exact minimum is found without evaluating every m in full.
inline WindowChoice select_window_global(const SignalGrid& grid, const Interval& range,
                                         const DerivativeInfo& info, const Kernel& k,
                                         double delta, const WindowOptions& opt = {}) {
  const auto [m_min, m_max] = window_scan_range(grid, range, k, opt);
  const GlobalBudgetModel model(k, info, range, grid.step, delta, opt);
  std::vector<std::pair<double, int>> order;
  order.reserve(m_max - m_min + 1);
  for (int m = m_min; m <= m_max; ++m) order.emplace_back(model.lower_bound(m), m);
  std::sort(order.begin(), order.end());
  WindowChoice best;
  double best_total = std::numeric_limits<double>::infinity();
  for (const auto& [lb, m] : order) {
    if (lb > best_total) break;
    const ErrorBudget b = model.budget(m);
    if (b.b_total < best_total || (b.b_total == best_total && m < best.m)) {
      best_total = b.b_total;
      best.m = m;
      best.budget = b;
    }
  }
  return best;
}

/// Per-point budgets on the sample grid. The derivative bound at index i is
/// the max of |f^{(e)}| over samples within h / (e + 1) of x_i, and the
/// trapezoid term uses sup|k''| sup|f| + 2h sup|k'| sup|f'| + h² sup|k| sup|f''|
/// with the f-sups over the window.
class LocalBudgetModel {
 public:
  LocalBudgetModel(const Kernel& k, const SignalGrid& grid, const DerivativeInfo& info,
                   double delta)
      : n_(k.n()),
        q_(k.q()),
        step_(grid.step),
        count_(grid.count),
        delta_(delta),
        consts_(detail::kernel_constants(k)) {
    if (delta < 0.0) throw ParameterError("delta must be non-negative");
    const TrapezoidErrorModel trap(k);
    for (int d = 0; d < 3; ++d) kernel_sup_[d] = trap.kernel_derivative_sup(d);
    if (auto* fn = std::get_if<DerivativeFn>(&info)) {
      const int orders[4] = {consts_.e, 0, 1, 2};
      for (int s = 0; s < 4; ++s) {
        std::vector<double> v(grid.count);
        for (std::size_t i = 0; i < grid.count; ++i) v[i] = std::abs((*fn)(orders[s], grid.at(i)));
        tables_[s] = detail::RangeMax(std::move(v));
      }
      analytic_ = true;
    } else {
      bounds_ = std::get<DerivativeBounds>(info);
      if (!(bounds_.m_bound > 0.0)) throw ParameterError("a positive derivative bound is required");
    }
  }

  /// Budget at sample index i with window m; requires m <= i <= count-1-m.
  ErrorBudget budget(std::size_t i, int m) const {
    const double h = m * step_;
    ErrorBudget b;
    b.branch = consts_.branch;
    b.c3 = consts_.c3;
    b.c4 = consts_.c4;
    b.delta = delta_;
    b.h_opt = h;
    const auto mm = static_cast<std::size_t>(m);
    double f_sup[3] = {0.0, 0.0, 0.0};
    bool have_f = false;
    if (analytic_) {
      const auto r = static_cast<std::size_t>(std::ceil(static_cast<double>(m) / (consts_.e + 1)));
      const std::size_t lo = i >= r ? i - r : 0;
      const std::size_t hi = std::min(count_ - 1, i + r);
      b.m_bound = tables_[0].query(lo, hi);
      for (int d = 0; d < 3; ++d) f_sup[d] = tables_[d + 1].query(i - mm, i + mm);
      have_f = true;
    } else {
      b.m_bound = bounds_.m_bound;
      if (bounds_.f_sup) {
        for (int d = 0; d < 3; ++d) f_sup[d] = (*bounds_.f_sup)[d];
        have_f = true;
      }
    }
    b.c_bias = b.m_bound / factorial(consts_.e) * consts_.abs_e;
    b.b_bias = b.c_bias * std::pow(h, bias_order(q_, b.branch));
    b.b_noise = b.c3 * delta_ / std::pow(h, n_);
    if (have_f) {
      b.b_num = trapezoid_factor(m) * (kernel_sup_[2] * f_sup[0] + 2.0 * h * kernel_sup_[1] * f_sup[1] +
                                       h * h * kernel_sup_[0] * f_sup[2]);
    }
    detail::finish_budget(b);
    return b;
  }

 private:
  int n_;
  int q_;
  double step_;
  std::size_t count_;
  double delta_;
  detail::KernelConstants consts_;
  std::array<double, 3> kernel_sup_{};
  bool analytic_ = false;
  std::array<detail::RangeMax, 4> tables_;
  DerivativeBounds bounds_;
};

/// For every sample index in `range`, the m_i minimizing the local B_total
/// over [m_min, min(m_max, data extent around x_i)]. Points where even m_min
/// does not fit are skipped.
inline std::vector<LocalWindow> select_window_local(const SignalGrid& grid, const Interval& range,
                                                    const DerivativeInfo& info, const Kernel& k,
                                                    double delta, const WindowOptions& opt = {}) {
  if (!(grid.step > 0.0) || grid.count < 3) throw ParameterError("invalid signal grid");
  const int m_min = opt.m_min > 0 ? opt.m_min : default_m_min(k);
  const LocalBudgetModel model(k, grid, info, delta);
  std::vector<LocalWindow> out;
  const std::size_t first = detail::first_index_at_or_after(grid, range.lo);
  const std::size_t last = detail::last_index_at_or_before(grid, range.hi);
  for (std::size_t i = first; i <= last && i < grid.count; ++i) {
    const long long fit = std::min<long long>(static_cast<long long>(i),
                                              static_cast<long long>(grid.count - 1 - i));
    const int m_hi = static_cast<int>(std::min<long long>({fit, opt.m_max}));
    if (m_hi < m_min) continue;
    LocalWindow best{i, grid.at(i), 0, {}};
    double best_total = std::numeric_limits<double>::infinity();
    for (int m = m_min; m <= m_hi; ++m) {
      const ErrorBudget b = model.budget(i, m);
      if (b.b_total < best_total) {
        best_total = b.b_total;
        best.m = m;
        best.budget = b;
      }
    }
    out.push_back(best);
  }
  if (out.empty()) throw ParameterError("no evaluation point admits the minimum window");
  return out;
}

}  // namespace jacdiff
