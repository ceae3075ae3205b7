#pragma once

// Signal I/O, synthetic noisy signals and the experiment runners used by the
// command-line tool and the acceptance suite.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "jacdiff/error.hpp"
#include "jacdiff/error_model.hpp"
#include "jacdiff/estimator.hpp"
#include "jacdiff/kernel.hpp"
#include "jacdiff/test_functions.hpp"

namespace jacdiff {

/// Gaussian white noise with standard deviation sigma; delta = 3 sigma.
struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;

  double delta() const noexcept { return 3.0 * sigma; }
  static NoiseModel from_delta(double delta, std::uint64_t seed) { return {delta / 3.0, seed}; }
};

inline constexpr double kGridTolerance = 1e-5;

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Two-column x,y text with an optional header line. The grid must be
/// strictly increasing and uniform: every spacing within kGridTolerance
/// (relative) of x1 - x0.
inline SampledSignal parse_csv(std::istream& in) {
  std::vector<double> xs;
  std::vector<double> ys;
  std::string line;
  int line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected two comma-separated columns");
    }
    const auto rest = text.substr(comma + 1);
    const auto y_text = rest.substr(0, rest.find(','));
    const auto x = detail::to_double(text.substr(0, comma));
    const auto y = detail::to_double(y_text);
    if (!x || !y) {
      if (!seen_content && !x) {
        seen_content = true;  // header
        continue;
      }
      throw ParseError("line " + std::to_string(line_no) + ": non-numeric cell '" +
                       std::string(detail::trim(x ? y_text : text.substr(0, comma))) + "'");
    }
    if (!std::isfinite(*x) || !std::isfinite(*y)) {
      throw ParseError("line " + std::to_string(line_no) + ": non-finite value");
    }
    seen_content = true;
    xs.push_back(*x);
    ys.push_back(*y);
  }
  if (xs.size() < 2) throw FormatError("signal needs at least two rows");
  const double step = xs[1] - xs[0];
  if (!(step > 0.0)) throw FormatError("row 2: abscissas must be strictly increasing");
  for (std::size_t r = 2; r < xs.size(); ++r) {
    const double dx = xs[r] - xs[r - 1];
    if (!(std::abs(dx - step) <= kGridTolerance * step)) {
      throw FormatError("row " + std::to_string(r + 1) + ": non-uniform grid (spacing " +
                        detail::format_double(dx) + ", expected " + detail::format_double(step) +
                        ")");
    }
  }
  return SampledSignal{xs[0], step, std::move(ys)};
}

inline SampledSignal load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return parse_csv(in);
}

/// Writes x,y with round-trip precision. x is origin + i * step.
inline void write_csv(std::ostream& out, const SampledSignal& sig) {
  out << "x,y\n";
  for (std::size_t i = 0; i < sig.size(); ++i) {
    out << detail::format_double(sig.abscissa(i)) << ',' << detail::format_double(sig.values[i])
        << '\n';
  }
}

inline void write_estimates_csv(std::ostream& out, const EstimateSeries& est) {
  out << "x,value,b_bias,b_noise,b_num,b_total\n";
  for (std::size_t i = 0; i < est.values.size(); ++i) {
    out << detail::format_double(est.abscissas[i]) << ',' << detail::format_double(est.values[i]);
    if (i < est.bounds.size()) {
      const auto& b = est.bounds[i];
      out << ',' << detail::format_double(b.b_bias) << ',' << detail::format_double(b.b_noise)
          << ',' << detail::format_double(b.b_num) << ',' << detail::format_double(b.b_total);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

inline nlohmann::json to_json(const ErrorBudget& b) {
  return {{"c_bias", b.c_bias},   {"c3", b.c3},           {"c4", b.c4},
          {"m_bound", b.m_bound}, {"delta", b.delta},     {"h_opt", b.h_opt},
          {"b_bias", b.b_bias},   {"b_noise", b.b_noise}, {"b_num", b.b_num},
          {"b_total", b.b_total}, {"branch", to_string(b.branch)}};
}

// ---------------------------------------------------------------------------
// Synthetic signals

/// Samples of f on [a, b] (both ends included when (b - a) / step is
/// integral) plus sigma * N(0,1) noise. The stream depends on
/// (noise.seed, stream) only.
template <class F>
SampledSignal synthesize(F&& f, double a, double b, double step, const NoiseModel& noise,
                         std::uint64_t stream = 0) {
  if (!(b > a)) throw ParameterError("synthesize: need a < b");
  if (!(step > 0.0)) throw ParameterError("synthesize: step must be positive");
  if (noise.sigma < 0.0) throw ParameterError("synthesize: sigma must be non-negative");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  SampledSignal sig{a, step, std::vector<double>(count)};
  std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    sig.values[i] = f(sig.abscissa(i));
    if (noise.sigma > 0.0) sig.values[i] += noise.sigma * normal(rng);
  }
  return sig;
}

// ---------------------------------------------------------------------------
// Reference tables

/// One published reference cell: max error over [-2, 2] and the window m.
struct TableReference {
  int example = 0;
  double delta = 0.0;
  double step = 0.0;
  int n = 0;
  double alpha = 0.0;
  int q = 0;
  std::optional<double> error;
  int m = 0;
  bool fixed_m = false;  ///< m is prescribed rather than selected
};

inline const std::vector<TableReference>& reference_tables() {
  static const std::vector<TableReference> rows = [] {
    std::vector<TableReference> r;
    auto add = [&](int ex, double delta, double step, int n, double alpha, int q,
                   std::optional<double> err, int m, bool fixed) {
      r.push_back({ex, delta, step, n, alpha, q, err, m, fixed});
    };
    const double e1[3][4] = {{9.45e-2, 1.1, 12.58, 127.8},
                             {1.85e-2, 0.2951, 3.888, 45.88},
                             {4.06e-2, 0.5645, 7.359, 96.86}};
    const int m1[3][4] = {{591, 698, 777, 850}, {425, 523, 601, 675}, {47, 55, 62, 69}};
    const double e2[3][4] = {{0.142, 2.152, 29.82, 375.6},
                             {2.22e-2, 0.4435, 5.973, 87.69},
                             {0.3404, 3.425, 36.38, 523.5}};
    const int m2[3][4] = {{442, 549, 643, 733}, {346, 428, 510, 595}, {54, 61, 68, 79}};
    const double deltas[3] = {0.15, 0.015, 0.015};
    const double steps[3] = {1e-3, 1e-3, 1e-2};
    for (int c = 0; c < 3; ++c) {
      for (int n = 1; n <= 4; ++n) add(1, deltas[c], steps[c], n, 5.0, 4, e1[c][n - 1], m1[c][n - 1], false);
    }
    for (int c = 0; c < 3; ++c) {
      for (int n = 1; n <= 4; ++n) add(2, deltas[c], steps[c], n, 5.0, 4, e2[c][n - 1], m2[c][n - 1], false);
    }
    add(3, 0.15, 1e-3, 1, 5.0, 4, 9.7e-3, 1700, true);
    add(3, 0.15, 1e-3, 2, 5.0, 4, 9.65e-2, 1700, true);
    add(3, 0.15, 1e-3, 3, 2.0, 2, std::nullopt, 1700, true);
    add(3, 0.015, 1e-3, 1, 5.0, 4, 4.7e-3, 1200, true);
    add(3, 0.015, 1e-3, 2, 5.0, 4, 7.23e-2, 1200, true);
    add(3, 0.015, 1e-3, 3, 2.0, 2, std::nullopt, 1500, true);
    return r;
  }();
  return rows;
}

/// Reference rows of one example at one (delta, step), sorted by n.
inline std::vector<TableReference> reference_rows(int example, double delta, double step) {
  std::vector<TableReference> out;
  for (const auto& r : reference_tables()) {
    if (r.example == example && std::abs(r.delta - delta) <= 1e-12 * delta &&
        std::abs(r.step - step) <= 1e-12 * step) {
      out.push_back(r);
    }
  }
  if (out.empty()) {
    std::ostringstream msg;
    msg << "no reference rows for example " << example << " at delta=" << delta
        << ", step=" << step;
    throw ParameterError(msg.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

struct Summary {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

inline Summary summarize(std::vector<double> v) {
  if (v.empty()) throw ParameterError("summarize: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return {v.front(), median, v.back()};
}

inline constexpr double kTableHalfRange = 2.0;
inline constexpr double kTableSignalHalfRange = 4.0;

struct TableRow {
  TableReference reference;
  EstimatorParams params;
  int m = 0;  ///< selected (or prescribed) global window
  ErrorBudget budget;
  std::vector<double> errors;  ///< max error over [-2, 2], one per seed
  Summary summary;
  // Local-window variant; empty when the row has a prescribed m.
  std::vector<double> local_errors;
  std::optional<Summary> local_summary;
  int local_m_min = 0;
  int local_m_max = 0;
};

struct TableReport {
  int example = 0;
  double delta = 0.0;
  double step = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<TableRow> rows;
};

namespace detail {

inline double max_error(const EstimateSeries& est, const std::function<double(double)>& exact) {
  double worst = 0.0;
  for (std::size_t i = 0; i < est.values.size(); ++i) {
    worst = std::max(worst, std::abs(est.values[i] - exact(est.abscissas[i])));
  }
  return worst;
}

inline std::vector<std::size_t> indices_in(const SignalGrid& g, double lo, double hi) {
  std::vector<std::size_t> out;
  for (std::size_t i = first_index_at_or_after(g, lo); i < g.count && g.at(i) <= hi + 1e-9 * g.step;
       ++i) {
    out.push_back(i);
  }
  return out;
}

}  // namespace detail

struct TableOptions {
  std::vector<int> n_list;  ///< empty: every reference row
  bool local = true;        ///< also run the local-window variant
  bool noise_free = false;  ///< select windows for delta but sample without noise
};

/// Reproduces one column block of a reference table: for each n, selects m
/// (unless prescribed), then measures the max error over [-2, 2] on noisy
/// samples for every seed.
inline TableReport run_table(int example, double delta, double step,
                             const std::vector<std::uint64_t>& seeds, const TableOptions& opt = {}) {
  if (example < 1 || example > 3) throw ParameterError("example must be 1, 2 or 3");
  if (seeds.empty()) throw ParameterError("run_table: at least one seed required");
  const TestFunction fn(static_cast<TestFunctionId>(example - 1));
  TableReport report{example, delta, step, seeds, {}};
  const NoiseModel base = NoiseModel::from_delta(delta, 0);
  const Interval range{-kTableHalfRange, kTableHalfRange};
  for (const auto& ref : reference_rows(example, delta, step)) {
    if (!opt.n_list.empty() &&
        std::find(opt.n_list.begin(), opt.n_list.end(), ref.n) == opt.n_list.end()) {
      continue;
    }
    TableRow row;
    row.reference = ref;
    row.params = {ref.n, ref.alpha, ref.alpha, ref.q};
    const Kernel k = make_kernel(row.params);
    const DerivativeFn deriv = [&fn](int order, double x) { return fn.derivative(order, x); };
    auto exact = [&fn, n = ref.n](double x) { return fn.derivative(n, x); };

    SampledSignal clean =
        synthesize(fn, -kTableSignalHalfRange, kTableSignalHalfRange, step, NoiseModel{});
    const SignalGrid grid = SignalGrid::of(clean);
    if (ref.fixed_m) {
      row.m = ref.m;
      row.budget = GlobalBudgetModel(k, deriv, range, step, delta).budget(row.m);
    } else {
      const auto choice = select_window_global(grid, range, deriv, k, delta);
      row.m = choice.m;
      row.budget = choice.budget;
    }
    const auto points = detail::indices_in(grid, range.lo, range.hi);
    std::vector<LocalWindow> local;
    std::vector<std::size_t> local_idx;
    std::vector<int> local_m;
    if (opt.local && !ref.fixed_m) {
      local = select_window_local(grid, range, deriv, k, delta);
      for (const auto& w : local) {
        local_idx.push_back(w.index);
        local_m.push_back(w.m);
      }
      const auto [lo, hi] = std::minmax_element(local_m.begin(), local_m.end());
      row.local_m_min = *lo;
      row.local_m_max = *hi;
    }
    for (const auto seed : seeds) {
      const NoiseModel noise{opt.noise_free ? 0.0 : base.sigma, seed};
      const auto stream = static_cast<std::uint64_t>(example) << 32 | static_cast<std::uint64_t>(ref.n);
      const SampledSignal sig = synthesize(fn, -kTableSignalHalfRange, kTableSignalHalfRange, step,
                                           noise, stream);
      const std::vector<int> windows(points.size(), row.m);
      const auto est = estimate_sampled_varying(sig, k, points, windows);
      row.errors.push_back(detail::max_error(est, exact));
      if (!local_idx.empty()) {
        const auto est_local = estimate_sampled_varying(sig, k, local_idx, local_m);
        row.local_errors.push_back(detail::max_error(est_local, exact));
      }
    }
    row.summary = summarize(row.errors);
    if (!row.local_errors.empty()) row.local_summary = summarize(row.local_errors);
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline nlohmann::json to_json(const Summary& s) {
  return {{"min", s.min}, {"median", s.median}, {"max", s.max}};
}

inline nlohmann::json to_json(const TableReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j{{"n", row.params.n},
                     {"alpha", row.params.alpha},
                     {"beta", row.params.beta},
                     {"q", row.params.q},
                     {"m", row.m},
                     {"m_reference", row.reference.m},
                     {"m_prescribed", row.reference.fixed_m},
                     {"error_reference", row.reference.error ? nlohmann::json(*row.reference.error)
                                                             : nlohmann::json(nullptr)},
                     {"errors", row.errors},
                     {"summary", to_json(row.summary)},
                     {"budget", to_json(row.budget)}};
    if (row.local_summary) {
      j["local"] = {{"errors", row.local_errors},
                    {"summary", to_json(*row.local_summary)},
                    {"m_min", row.local_m_min},
                    {"m_max", row.local_m_max}};
    }
    rows.push_back(std::move(j));
  }
  return {{"example", r.example}, {"delta", r.delta}, {"step", r.step},
          {"seeds", r.seeds},     {"rows", rows}};
}

struct SlopeReport {
  std::vector<double> h;
  std::vector<double> errors;
  double slope = 0.0;
  bool floor_limited = false;
};

/// Errors at or below this are treated as quadrature round-off.
inline constexpr double kErrorFloor = 1e-10;

/// Noise-free convergence: max over 41 points of [-1, 1] of
/// |estimate - f^{(n)}| for each h, and the least-squares slope of
/// log(error) against log(h).
template <class F, class Fn>
SlopeReport run_slope(F&& f, Fn&& f_n, const EstimatorParams& params,
                      const std::vector<double>& h_list, int x_points = 41) {
  if (h_list.size() < 3) throw ParameterError("run_slope: need at least 3 values of h");
  const auto [lo, hi] = std::minmax_element(h_list.begin(), h_list.end());
  if (!(*lo > 0.0)) throw ParameterError("run_slope: h must be positive");
  if (*hi < 4.0 * *lo) throw ParameterError("run_slope: h values must span a factor of at least 4");
  const Kernel k = make_kernel(params);
  SlopeReport out;
  out.h = h_list;
  for (double h : h_list) {
    double worst = 0.0;
    for (int i = 0; i < x_points; ++i) {
      const double x = x_points == 1 ? 0.0 : -1.0 + 2.0 * i / (x_points - 1);
      worst = std::max(worst, std::abs(estimate_analytic(f, x, h, k) - f_n(x)));
    }
    out.errors.push_back(worst);
  }
  const auto floored = std::count_if(out.errors.begin(), out.errors.end(),
                                     [](double e) { return e <= kErrorFloor; });
  out.floor_limited = floored * 2 >= static_cast<long>(out.errors.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h_list.size());
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    const double x = std::log(h_list[i]);
    const double y = std::log(std::max(out.errors[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

struct SweepRow {
  int n = 0;
  int q = 0;
  double alpha = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
};

struct SweepCheck {
  std::string description;
  bool passed = true;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepCheck> checks;
};

/// C3 and C4 of the ultraspherical-parameter kernels (alpha = beta) over the
/// given grid, with monotonicity checks: C3 nondecreasing in q and in alpha,
/// C4 nonincreasing in alpha.
inline SweepReport run_sweep(const std::vector<int>& n_list, const std::vector<int>& q_list,
                             const std::vector<double>& alpha_list) {
  if (n_list.empty() || q_list.empty() || alpha_list.empty()) {
    throw ParameterError("run_sweep: lists must be nonempty");
  }
  SweepReport out;
  const std::size_t nq = q_list.size();
  const std::size_t na = alpha_list.size();
  for (int n : n_list) {
    for (int q : q_list) {
      for (double a : alpha_list) {
        const Kernel k = make_kernel({n, a, a, q});
        out.rows.push_back({n, q, a, compute_c3(k), compute_c4(k)});
      }
    }
  }
  auto at = [&](std::size_t in, std::size_t iq, std::size_t ia) -> const SweepRow& {
    return out.rows[(in * nq + iq) * na + ia];
  };
  const double tol = 1e-8;
  SweepCheck c3_q{"C3 nondecreasing in q", true};
  SweepCheck c3_a{"C3 nondecreasing in alpha", true};
  SweepCheck c4_a{"C4 nonincreasing in alpha", true};
  for (std::size_t in = 0; in < n_list.size(); ++in) {
    for (std::size_t iq = 0; iq < nq; ++iq) {
      for (std::size_t ia = 0; ia < na; ++ia) {
        const auto& r = at(in, iq, ia);
        if (iq + 1 < nq && q_list[iq + 1] > q_list[iq] && at(in, iq + 1, ia).c3 < r.c3 - tol) {
          c3_q.passed = false;
        }
        if (ia + 1 < na && alpha_list[ia + 1] > alpha_list[ia]) {
          if (at(in, iq, ia + 1).c3 < r.c3 - tol) c3_a.passed = false;
          if (at(in, iq, ia + 1).c4 > r.c4 + tol) c4_a.passed = false;
        }
      }
    }
  }
  out.checks = {c3_q, c3_a, c4_a};
  return out;
}

inline void write_sweep_csv(std::ostream& out, const SweepReport& r) {
  out << "n,q,alpha,c3,c4\n";
  for (const auto& row : r.rows) {
    out << row.n << ',' << row.q << ',' << detail::format_double(row.alpha) << ','
        << detail::format_double(row.c3) << ',' << detail::format_double(row.c4) << '\n';
  }
}

}  // namespace jacdiff
