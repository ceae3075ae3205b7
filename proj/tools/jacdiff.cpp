// jacdiff: derivative estimation from sampled data with Jacobi kernels.
//
// Exit codes: 0 success, 2 input format error, 3 parameter error,
// 4 certificate or validation failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <nlohmann/json.hpp>

#include "jacdiff/jacdiff.hpp"

namespace jd = jacdiff;

namespace {

constexpr const char* kOutputDirVar = "JACDIFF_OUTPUT_DIR";

/// Relative output paths are placed under $JACDIFF_OUTPUT_DIR when set.
std::filesystem::path output_path(const std::string& name) {
  std::filesystem::path p(name);
  if (p.is_relative()) {
    if (const char* dir = std::getenv(kOutputDirVar); dir != nullptr && *dir != '\0') {
      std::filesystem::create_directories(dir);
      return std::filesystem::path(dir) / p;
    }
  }
  return p;
}

template <class Write>
void emit(const std::string& target, Write&& write) {
  if (target.empty() || target == "-") {
    write(std::cout);
    return;
  }
  const auto path = output_path(target);
  std::ofstream out(path);
  if (!out) throw jd::ParameterError("cannot write '" + path.string() + "'");
  write(out);
}

void emit_json(const std::string& target, const nlohmann::json& doc) {
  emit(target, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

struct KernelArgs {
  int n = 1;
  double alpha = 5.0;
  std::optional<double> beta;
  int q = 4;

  jd::EstimatorParams params() const { return {n, alpha, beta.value_or(alpha), q}; }

  void attach(CLI::App* app) {
    app->add_option("--n", n, "derivative order")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--alpha", alpha, "weight exponent at t = 1")->capture_default_str();
    app->add_option("--beta", beta, "weight exponent at t = -1 (default: alpha)");
    app->add_option("--q", q, "truncation order")->capture_default_str()->check(CLI::NonNegativeNumber);
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = jd::detail::to_double(item);
    if (!v) throw jd::ParameterError("not a number: '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  KernelArgs kernel;
  std::string input;
  std::string fn;
  std::vector<double> domain{-4.0, 4.0};
  double step = 1e-3;
  std::vector<double> range;
  std::optional<int> m;
  bool auto_window = false;
  bool local_window = false;
  std::optional<double> sigma;
  std::optional<double> delta;
  std::uint64_t seed = 0;
  std::optional<double> m_bound;
  std::string f_bounds;
  std::string output;
  std::string report;
};

int run_estimate(const EstimateArgs& a) {
  const auto params = a.kernel.params();
  const jd::Kernel k = jd::make_kernel(params);
  const double delta = a.delta ? *a.delta : 3.0 * a.sigma.value_or(0.0);
  if (delta < 0.0) throw jd::ParameterError("noise level must be non-negative");

  jd::SampledSignal sig;
  std::optional<jd::DerivativeInfo> info;
  std::optional<jd::TestFunction> fn;
  if (!a.fn.empty()) {
    fn = jd::TestFunction::parse(a.fn);
    if (a.domain.size() != 2) throw jd::ParameterError("--domain takes two values");
    sig = jd::synthesize(*fn, a.domain[0], a.domain[1], a.step, jd::NoiseModel::from_delta(delta, a.seed));
    info = jd::DerivativeFn([f = *fn](int order, double x) { return f.derivative(order, x); });
  } else {
    sig = jd::load_csv(a.input);
    jd::validate(sig);
  }
  if (a.m_bound) {
    jd::DerivativeBounds bounds{*a.m_bound, std::nullopt};
    if (!a.f_bounds.empty()) {
      const auto v = parse_list(a.f_bounds);
      if (v.size() != 3) throw jd::ParameterError("--f-bounds takes sup|f|,sup|f'|,sup|f''|");
      bounds.f_sup = std::array<double, 3>{v[0], v[1], v[2]};
    }
    info = bounds;
  }

  const jd::SignalGrid grid = jd::SignalGrid::of(sig);
  jd::Interval range{sig.origin, sig.last_abscissa()};
  if (!a.range.empty()) {
    if (a.range.size() != 2 || !(a.range[1] >= a.range[0])) throw jd::ParameterError("--range takes LO HI");
    range = {a.range[0], a.range[1]};
  } else if (fn) {
    range = {-2.0, 2.0};
  }

  nlohmann::json report{{"params",
                         {{"n", params.n}, {"alpha", params.alpha}, {"beta", params.beta}, {"q", params.q}}},
                        {"signal", {{"origin", sig.origin}, {"step", sig.step}, {"samples", sig.size()}}},
                        {"delta", delta}};
  jd::EstimateSeries est;
  if (a.local_window) {
    if (!info) throw jd::ParameterError("--local-window needs --fn or --m-bound");
    const auto windows = jd::select_window_local(grid, range, *info, k, delta);
    std::vector<std::size_t> idx;
    std::vector<int> ms;
    for (const auto& w : windows) {
      idx.push_back(w.index);
      ms.push_back(w.m);
    }
    est = jd::estimate_sampled_varying(sig, k, idx, ms);
    for (const auto& w : windows) {
      est.bounds.push_back({w.budget.b_bias, w.budget.b_noise, w.budget.b_num, w.budget.b_total});
    }
    const auto [lo, hi] = std::minmax_element(ms.begin(), ms.end());
    report["window"] = {{"mode", "local"}, {"m_min", *lo}, {"m_max", *hi}};
  } else {
    int m = 0;
    if (a.auto_window) {
      if (!info) throw jd::ParameterError("--auto-window needs --fn or --m-bound");
      const auto choice = jd::select_window_global(grid, range, *info, k, delta);
      m = choice.m;
      report["window"] = {{"mode", "global"}, {"m", m}, {"h", m * sig.step}};
      report["budget"] = jd::to_json(choice.budget);
    } else {
      m = *a.m;
      report["window"] = {{"mode", "fixed"}, {"m", m}, {"h", m * sig.step}};
    }
    jd::detail::require_length(sig, m);
    std::vector<std::size_t> idx;
    for (auto i : jd::detail::indices_in(grid, range.lo, range.hi)) {
      if (i >= static_cast<std::size_t>(m) && i + m < sig.size()) idx.push_back(i);
    }
    if (idx.empty()) throw jd::WindowError("no point of the range has a full window inside the data");
    est = jd::estimate_sampled_varying(sig, k, idx, std::vector<int>(idx.size(), m));
    est.windows.clear();
    if (info) {
      const jd::LocalBudgetModel model(k, grid, *info, delta);
      for (auto i : idx) {
        const auto b = model.budget(i, m);
        est.bounds.push_back({b.b_bias, b.b_noise, b.b_num, b.b_total});
      }
    }
  }
  report["estimates"] = est.values.size();
  if (!est.abscissas.empty()) report["range"] = {est.abscissas.front(), est.abscissas.back()};
  if (fn) {
    double worst = 0.0;
    for (std::size_t i = 0; i < est.values.size(); ++i) {
      worst = std::max(worst, std::abs(est.values[i] - fn->derivative(params.n, est.abscissas[i])));
    }
    report["max_error"] = worst;
  }
  emit(a.output, [&](std::ostream& out) { jd::write_estimates_csv(out, est); });
  if (!a.report.empty()) emit_json(a.report, report);
  return 0;
}

// ---------------------------------------------------------------------------
// validate

int run_validate(const std::string& output) {
  nlohmann::json failures = nlohmann::json::array();
  int checked = 0;
  auto check = [&](const jd::EstimatorParams& p) {
    ++checked;
    try {
      (void)jd::make_kernel(p);
      if (std::abs(jd::affine_coefficient_sum(p) - 1.0) > 1e-10) {
        failures.push_back({{"n", p.n}, {"alpha", p.alpha}, {"beta", p.beta}, {"q", p.q}, {"error", "coefficient sum"}});
      }
    } catch (const jd::CertificateError& e) {
      failures.push_back({{"n", p.n}, {"alpha", p.alpha}, {"beta", p.beta}, {"q", p.q}, {"error", e.what()}});
    }
  };
  const double params[] = {-0.5, 0.0, 0.5, 1.0, 2.0, 5.0, 10.0};
  for (int n = 0; n <= 4; ++n) {
    for (int q = 0; q <= 8; ++q) {
      for (double a : params) {
        for (double b : params) check({n, a, b, q});
      }
    }
  }
  emit_json(output, {{"kernels_checked", checked}, {"failures", failures}, {"passed", failures.empty()}});
  return failures.empty() ? 0 : static_cast<int>(jd::ExitCode::kCertificate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Derivative estimation from noisy samples with Jacobi-polynomial kernels"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "estimate the n-th derivative of a sampled signal");
  est.kernel.attach(estimate);
  auto* in_opt = estimate->add_option("--input", est.input, "CSV file with x,y rows")->check(CLI::ExistingFile);
  auto* fn_opt = estimate->add_option("--fn", est.fn, "synthetic test signal: f1, f2 or f3");
  in_opt->excludes(fn_opt);
  estimate->add_option("--domain", est.domain, "synthetic signal extent A B")->expected(2)->capture_default_str();
  estimate->add_option("--step", est.step, "synthetic sampling period")->capture_default_str();
  estimate->add_option("--range", est.range, "evaluation range LO HI")->expected(2);
  auto* m_opt = estimate->add_option("--m", est.m, "fixed window: 2m+1 samples")->check(CLI::PositiveNumber);
  auto* auto_opt = estimate->add_flag("--auto-window", est.auto_window, "one window minimizing the total bound");
  auto* local_opt = estimate->add_flag("--local-window", est.local_window, "per-point windows");
  m_opt->excludes(auto_opt)->excludes(local_opt);
  auto_opt->excludes(local_opt);
  auto* sigma_opt = estimate->add_option("--sigma", est.sigma, "Gaussian noise standard deviation (delta = 3 sigma)");
  auto* delta_opt = estimate->add_option("--delta", est.delta, "noise level bound");
  sigma_opt->excludes(delta_opt);
  estimate->add_option("--seed", est.seed, "noise seed for synthetic signals")->capture_default_str();
  estimate->add_option("--m-bound", est.m_bound, "bound on the derivative entering the bias term");
  estimate->add_option("--f-bounds", est.f_bounds, "sup|f|,sup|f'|,sup|f''| for the trapezoid term");
  estimate->add_option("--output", est.output, "estimates CSV (default: stdout)");
  estimate->add_option("--report", est.report, "JSON report with window and budget");

  auto* kernel = app.add_subcommand("kernel", "kernel utilities");
  kernel->require_subcommand(1);
  KernelArgs dump_args;
  std::string dump_out;
  auto* dump = kernel->add_subcommand("dump", "print a kernel as JSON");
  dump_args.attach(dump);
  dump->add_option("--output", dump_out, "output file (default: stdout)");

  int example = 2;
  double table_delta = 0.15, table_step = 1e-3;
  int table_seeds = 10;
  std::vector<int> table_n;
  bool no_local = false;
  std::string table_out;
  auto* table = app.add_subcommand("table", "reproduce a reference error table");
  table->add_option("--example", example, "1, 2 or 3")->check(CLI::Range(1, 3))->capture_default_str();
  table->add_option("--delta", table_delta, "noise level")->capture_default_str();
  table->add_option("--step", table_step, "sampling period")->capture_default_str();
  table->add_option("--seeds", table_seeds, "number of noise seeds")->check(CLI::PositiveNumber)->capture_default_str();
  table->add_option("--n", table_n, "derivative orders (default: all rows)");
  table->add_flag("--no-local", no_local, "skip the per-point window variant");
  table->add_option("--output", table_out, "JSON report (default: stdout)");

  KernelArgs slope_args;
  std::string slope_fn = "f1", slope_out, slope_h = "0.05,0.07,0.1,0.14,0.2,0.28,0.4";
  auto* slope = app.add_subcommand("slope", "noise-free convergence order");
  slope_args.attach(slope);
  slope->add_option("--fn", slope_fn, "test signal")->capture_default_str();
  slope->add_option("--h-list", slope_h, "comma-separated window half-lengths")->capture_default_str();
  slope->add_option("--output", slope_out, "JSON report (default: stdout)");

  std::string sweep_n = "1,2", sweep_q = "0,2,4,6,8", sweep_alpha = "0,1,2,3,4,5,6,7,8,9,10", sweep_out;
  auto* sweep = app.add_subcommand("sweep", "C3 and C4 over (n, q, alpha) with alpha = beta");
  sweep->add_option("--n", sweep_n, "comma-separated n")->capture_default_str();
  sweep->add_option("--q", sweep_q, "comma-separated q")->capture_default_str();
  sweep->add_option("--alpha", sweep_alpha, "comma-separated alpha")->capture_default_str();
  sweep->add_option("--output", sweep_out, "CSV (default: stdout)");

  std::string validate_out;
  auto* validate = app.add_subcommand("validate", "check moment certificates over a parameter grid");
  validate->add_option("--output", validate_out, "JSON report (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(jd::ExitCode::kParameter);
  }

  try {
    if (estimate->parsed()) {
      if (est.input.empty() && est.fn.empty()) throw jd::ParameterError("estimate needs --input or --fn");
      if (!est.m && !est.auto_window && !est.local_window) {
        throw jd::ParameterError("estimate needs one of --m, --auto-window, --local-window");
      }
      return run_estimate(est);
    }
    if (dump->parsed()) {
      emit_json(dump_out, jd::kernel_to_json(jd::make_kernel(dump_args.params())));
      return 0;
    }
    if (table->parsed()) {
      std::vector<std::uint64_t> seeds;
      for (int i = 1; i <= table_seeds; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
      const auto report = jd::run_table(example, table_delta, table_step, seeds, {table_n, !no_local});
      emit_json(table_out, jd::to_json(report));
      return 0;
    }
    if (slope->parsed()) {
      const auto f = jd::TestFunction::parse(slope_fn);
      const auto p = slope_args.params();
      const auto r = jd::run_slope(f, [&](double x) { return f.derivative(p.n, x); }, p, parse_list(slope_h));
      emit_json(slope_out, {{"h", r.h}, {"errors", r.errors}, {"slope", r.slope}, {"floor_limited", r.floor_limited}});
      return 0;
    }
    if (sweep->parsed()) {
      std::vector<int> ns, qs;
      for (double v : parse_list(sweep_n)) ns.push_back(static_cast<int>(v));
      for (double v : parse_list(sweep_q)) qs.push_back(static_cast<int>(v));
      const auto r = jd::run_sweep(ns, qs, parse_list(sweep_alpha));
      emit(sweep_out, [&](std::ostream& out) { jd::write_sweep_csv(out, r); });
      bool ok = true;
      for (const auto& c : r.checks) {
        std::cerr << (c.passed ? "ok   " : "FAIL ") << c.description << '\n';
        ok = ok && c.passed;
      }
      return ok ? 0 : static_cast<int>(jd::ExitCode::kCertificate);
    }
    if (validate->parsed()) return run_validate(validate_out);
  } catch (const jd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(jd::ExitCode::kParameter);
  }
  return 0;
}
