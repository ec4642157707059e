#include "xqr/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "xqr/extrapolate.hpp"
#include "xqr/fitter.hpp"
#include "xqr/io.hpp"

namespace xqr {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& msg) { detail::fail(ErrorKind::Config, msg); }

// Non-finite values become null in JSON.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::ofstream open_output(const std::string& dir, const std::string& name, std::string& path) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) detail::fail(ErrorKind::Io, "cannot create output directory '" + dir + "': " + ec.message());
  path = (fs::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) detail::fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path, std::ostream& log) {
  out.close();
  if (!out) detail::fail(ErrorKind::Io, "failed writing '" + path + "'");
  log << "wrote " << path << '\n';
}

XYData load(const RunConfig& c, std::ostream& log) {
  XYData data = read_xy_csv(c.input, c.x_col, c.y_col);
  log << "rows: " << data.rows << " read, " << data.dropped << " dropped with missing values\n";
  if (data.x.empty()) detail::fail(ErrorKind::Data, c.input + ": no complete (x, y) rows");
  return data;
}

BasisSpec basis_for(const XYData& data, const RunConfig& c) {
  const auto [lo, hi] = std::minmax_element(data.x.begin(), data.x.end());
  if (!(*lo < *hi)) {
    std::ostringstream os;
    os << "x-range is empty: every x equals " << *lo;
    detail::fail(ErrorKind::InvalidDomain, os.str());
  }
  return make_basis(*lo, *hi, c.knots, c.degree);
}

double parse_double(const std::string& text, const char* flag) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    config_error(std::string(flag) + ": expected a number, got '" + text + "'");
  return v;
}

}  // namespace

void RunConfig::validate() const {
  auto in_unit = [](double t) { return t > 0.0 && t < 1.0; };
  if (!in_unit(tau)) config_error("tau: must lie in (0, 1)");
  if (!in_unit(tau_e)) config_error("tau-e: must lie in (0, 1)");
  if (knots < 1) config_error("knots: must be >= 1");
  if (degree < 0) config_error("degree: must be >= 0");
  if (degree > 0 && (penalty_order < 1 || penalty_order > degree))
    config_error("penalty-order: must lie in [1, degree]");
  if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda))) config_error("lambda: must be >= 0 or 'gacv'");
  if (eta && !(*eta > 0.0 && *eta < 1.0)) config_error("eta: must lie in (0, 1)");
  if (!(xi > 0.0)) config_error("xi: must be > 0");
  if (k < 0 || k == 1) config_error("k: must be >= 2 or 'auto'");
  if (!(threshold > 0.0)) config_error("threshold: must be > 0");
  if (grid_points < 2) config_error("grid-points: must be >= 2");
  if (lambda_grid_size < 1) config_error("lambda-grid: must be >= 1");
  if (threads < 1) config_error("threads: must be >= 1");
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::Data:
    case ErrorKind::InvalidDomain:
    case ErrorKind::OutOfDomain:
      return 3;
    case ErrorKind::SingularSystem:
    case ErrorKind::AllFitsFailed:
    case ErrorKind::NonpositiveQuantile:
      return 4;
    default:
      return 2;
  }
}

void cmd_fit(const RunConfig& c, std::ostream& log) {
  c.validate();
  const XYData data = load(c, log);
  const BasisSpec spec = basis_for(data, c);
  const QuantileProblem problem(data.x, data.y, spec, c.degree == 0 ? 1 : c.penalty_order);
  const SolverConfig solver;

  QuantileFitModel model;
  if (c.lambda) {
    model = problem.fit(c.tau, *c.lambda, solver);
  } else {
    const auto grid = default_lambda_grid(data.y, c.lambda_grid_size);
    const auto sel = select_lambda_gacv(problem, c.tau, grid, solver, c.threads);
    model = sel.selected_fit();
    log << "gacv: lambda = " << format_number(sel.lambda) << " from " << grid.size() << " candidates\n";
  }
  log << "fit: tau = " << format_number(model.tau) << ", lambda = " << format_number(model.lambda)
      << ", objective = " << format_number(model.diagnostics.objective)
      << ", converged = " << (model.diagnostics.converged ? "yes" : "no") << '\n';

  std::string path;
  auto json = open_output(c.out_dir, "model.json", path);
  json << model_to_json(model);
  finish(json, path, log);

  auto curve = open_output(c.out_dir, "curve.csv", path);
  const auto grid = uniform_grid(spec.lower, spec.upper, c.grid_points);
  const auto q = predict(model, grid);
  curve << "x,q\n";
  for (std::size_t i = 0; i < grid.size(); ++i) curve << format_number(grid[i]) << ',' << format_number(q[i]) << '\n';
  finish(curve, path, log);
}

void cmd_tail(const RunConfig& c, std::ostream& log) {
  c.validate();
  const XYData data = load(c, log);
  const BasisSpec spec = basis_for(data, c);
  const QuantileProblem problem(data.x, data.y, spec, c.degree == 0 ? 1 : c.penalty_order);
  const SolverConfig solver;
  const auto n = static_cast<std::int64_t>(data.x.size());

  const double eta = c.eta ? *c.eta : eta_for_xi(n, c.xi);
  const int k = c.k > 0 ? c.k : default_k(n);
  const QuantileLadder ladder = make_ladder(n, eta, k);

  LambdaChoice choice;
  if (c.lambda) {
    choice.policy = LambdaPolicy::Fixed;
    choice.value = *c.lambda;
  } else {
    choice.policy = LambdaPolicy::GacvFirstLevel;
    choice.grid = default_lambda_grid(data.y, c.lambda_grid_size);
  }
  const auto fitted = fit_ladder(problem, ladder, choice, solver);
  const auto& fits = fitted.fits;
  const double lambda = fits.front().lambda;
  log << "ladder: k = " << k << ", tau_1 = " << format_number(ladder.levels.front())
      << ", tau_k = " << format_number(ladder.levels.back()) << ", lambda = " << format_number(lambda) << '\n';

  const EviEstimate sample = estimate_evi(fits, ladder, data.x);
  const auto invalid_x = sample.invalid_points();
  log << "evi: pooled gamma = " << format_number(sample.pooled) << " over " << sample.valid_count << " of "
      << n << " points\n";
  if (!invalid_x.empty())
    log << "evi: " << invalid_x.size() << " points excluded for a nonpositive ladder estimate\n";

  const int base = base_level_index(ladder, c.tau_e, c.base_level);
  if (base < 0) {
    std::ostringstream os;
    os << "no ladder level lies below tau_E = " << c.tau_e << " (ladder spans " << ladder.levels.back()
       << " .. " << ladder.levels.front() << ")";
    detail::fail(ErrorKind::LevelOrder, os.str());
  }
  const auto& base_fit = fits[static_cast<std::size_t>(base)];

  const auto grid = uniform_grid(spec.lower, spec.upper, c.grid_points);
  const auto values = ladder_values(fits, grid);
  std::vector<double> gamma(grid.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> gamma_filled(grid.size(), 0.0);
  std::size_t grid_invalid = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::all_of(values[i].begin(), values[i].end(), [](double q) { return q > 0.0; })) {
      gamma[i] = hill_from_quantiles(values[i], grid[i]);
      gamma_filled[i] = gamma[i];
    } else {
      ++grid_invalid;
    }
  }
  const auto pointwise = extrapolate_pointwise(base_fit, gamma_filled, c.tau_e, grid);
  const auto pooled = extrapolate_pooled(base_fit, sample.pooled, c.tau_e, grid);
  const RegimeVerdict verdict = classify_regime(c.tau_e, n, c.threshold);

  std::string path;
  auto path_csv = open_output(c.out_dir, "evi_path.csv", path);
  path_csv << "k,gamma_pooled\n";
  const auto sample_path = pooled_sample_path(ladder_values(fits, data.x));
  for (std::size_t i = 0; i < sample_path.size(); ++i)
    path_csv << i + 2 << ',' << format_number(sample_path[i]) << '\n';
  finish(path_csv, path, log);

  auto pw_csv = open_output(c.out_dir, "evi_pointwise.csv", path);
  pw_csv << "x,gamma,valid\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    pw_csv << format_number(grid[i]) << ',' << format_number(gamma[i]) << ',' << (std::isnan(gamma[i]) ? 0 : 1)
           << '\n';
  finish(pw_csv, path, log);

  auto ext_csv = open_output(c.out_dir, "extreme_curve.csv", path);
  ext_csv << "x,q_base,q_pointwise,q_pooled\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double qp = std::isnan(gamma[i]) ? std::numeric_limits<double>::quiet_NaN() : pointwise.values[i];
    ext_csv << format_number(grid[i]) << ',' << format_number(pointwise.base_values[i]) << ','
            << format_number(qp) << ',' << format_number(pooled.values[i]) << '\n';
  }
  finish(ext_csv, path, log);

  Json summary;
  summary["schema_version"] = 1;
  summary["input"] = c.input;
  summary["seed"] = c.seed;
  summary["n"] = n;
  summary["rows_read"] = data.rows;
  summary["rows_dropped"] = data.dropped;
  summary["tau_e"] = c.tau_e;
  summary["ladder"] = {{"eta", eta},
                       {"base", ladder.base},
                       {"k", k},
                       {"tau_first", ladder.levels.front()},
                       {"tau_last", ladder.levels.back()},
                       {"xi_first", (1.0 - ladder.levels.front()) * static_cast<double>(n)}};
  summary["lambda"] = lambda;
  summary["lambda_policy"] = c.lambda ? "fixed" : "gacv";
  summary["base_level"] = {{"rule", to_string(c.base_level)}, {"index", base + 1}, {"tau", base_fit.tau}};
  summary["gamma_pooled"] = sample.pooled;
  summary["pooled_points"] = sample.valid_count;
  summary["invalid_x"] = invalid_x;
  summary["grid_points"] = grid.size();
  summary["grid_invalid_gamma"] = grid_invalid;
  summary["refused_pointwise"] = pointwise.refused_count;
  summary["refused_pooled"] = pooled.refused_count;
  const auto mono = ladder_monotonicity(fits, grid);
  summary["ladder_min_monotone_fraction"] =
      mono.empty() ? Json(nullptr) : number(*std::min_element(mono.begin(), mono.end()));
  summary["regime"] = {{"tau", c.tau_e},
                       {"n", n},
                       {"xi", verdict.xi},
                       {"threshold", verdict.threshold},
                       {"regime", to_string(verdict.regime)}};
  auto json = open_output(c.out_dir, "tail_summary.json", path);
  json << summary.dump(2) << '\n';
  finish(json, path, log);

  log << "regime: xi = " << format_number(verdict.xi) << ", " << to_string(verdict.regime) << '\n';
}

void cmd_simulate(const StudyConfig& config, const std::string& out_dir, std::ostream& log) {
  config.validate();
  const StudyReport report = run_study(config);
  std::string path;
  auto rep = open_output(out_dir, "report.csv", path);
  write_report_csv(report, rep);
  finish(rep, path, log);
  auto detail_csv = open_output(out_dir, "replications.csv", path);
  write_replications_csv(report, detail_csv);
  finish(detail_csv, path, log);
  write_report_csv(report, log);
}

void cmd_classify(double tau, std::int64_t n, double threshold, std::ostream& out) {
  const RegimeVerdict v = classify_regime(tau, n, threshold);
  out << "tau = " << format_number(tau) << ", n = " << n << ": xi = " << format_number(v.xi) << ", "
      << to_string(v.regime) << " (threshold " << format_number(v.threshold) << ")\n";
  const Json j = {{"tau", tau}, {"n", n}, {"xi", v.xi}, {"threshold", v.threshold}, {"regime", to_string(v.regime)}};
  out << j.dump() << '\n';
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Extremal quantile regression with penalized B-splines"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string lambda_text = "gacv";
  std::string k_text = "auto";
  std::string base_text = "first";
  double eta = 0.0;

  auto add_data_flags = [&](CLI::App* sub) {
    sub->add_option("--input", rc.input, "CSV file with a header row")->required();
    sub->add_option("--x-col", rc.x_col, "covariate column")->capture_default_str();
    sub->add_option("--y-col", rc.y_col, "response column")->capture_default_str();
    sub->add_option("--knots", rc.knots, "number of knot intervals K")->capture_default_str();
    sub->add_option("--degree", rc.degree, "spline degree p")->capture_default_str();
    sub->add_option("--penalty-order", rc.penalty_order, "derivative order m")->capture_default_str();
    sub->add_option("--lambda", lambda_text, "smoothing parameter, or 'gacv'")->capture_default_str();
    sub->add_option("--grid-points", rc.grid_points, "output grid size")->capture_default_str();
    sub->add_option("--threads", rc.threads, "worker threads")->capture_default_str();
    sub->add_option("--seed", rc.seed, "recorded only; fitting is deterministic")->capture_default_str();
    sub->add_option("--out-dir", rc.out_dir, "output directory")->capture_default_str();
  };

  auto* fit = app.add_subcommand("fit", "fit one conditional quantile curve");
  add_data_flags(fit);
  fit->add_option("--tau", rc.tau, "quantile level")->capture_default_str();

  auto* tail = app.add_subcommand("tail", "ladder fits, EVI estimates and extrapolated curves");
  add_data_flags(tail);
  tail->add_option("--tau-e", rc.tau_e, "extreme target level")->required();
  auto* eta_opt = tail->add_option("--eta", eta, "ladder exponent, floor(n^eta) = first tail count");
  auto* xi_opt = tail->add_option("--xi", rc.xi, "ladder placement (1 - tau_1) n")->capture_default_str();
  eta_opt->excludes(xi_opt);
  tail->add_option("--k", k_text, "ladder length, or 'auto'")->capture_default_str();
  tail->add_option("--threshold", rc.threshold, "regime threshold on xi")->capture_default_str();
  tail->add_option("--base-level", base_text, "extrapolation base: first or last")->capture_default_str();

  StudyConfig sc;
  std::string sim_out = ".";
  std::vector<std::string> scenario_text{"A"};
  std::vector<std::string> estimator_text{"PSE-I", "PSE-E", "PSE-Ep"};
  std::string sim_k = "auto";
  std::string sim_base = "first";
  auto* sim = app.add_subcommand("simulate", "Monte Carlo MISE study");
  sim->add_option("--scenario", scenario_text, "A, B or A,B")->delimiter(',')->capture_default_str();
  sim->add_option("--n-list", sc.sample_sizes, "sample sizes")->delimiter(',')->capture_default_str();
  sim->add_option("--tau-list", sc.levels, "target levels")->delimiter(',')->capture_default_str();
  sim->add_option("--estimators", estimator_text, "subset of PSE-I,PSE-E,PSE-Ep")
      ->delimiter(',')
      ->capture_default_str();
  sim->add_option("--replications", sc.replications, "replications per sample size")->capture_default_str();
  sim->add_option("--seed", sc.root_seed, "root seed")->capture_default_str();
  sim->add_option("--knots", sc.knots, "number of knot intervals K")->capture_default_str();
  sim->add_option("--degree", sc.degree, "spline degree p")->capture_default_str();
  sim->add_option("--penalty-order", sc.penalty_order, "derivative order m")->capture_default_str();
  sim->add_option("--xi", sc.xi, "ladder placement (1 - tau_1) n")->capture_default_str();
  sim->add_option("--k", sim_k, "ladder length, or 'auto'")->capture_default_str();
  sim->add_option("--base-level", sim_base, "extrapolation base: first or last")->capture_default_str();
  sim->add_option("--grid-points", sc.grid_points, "MISE grid size")->capture_default_str();
  sim->add_option("--threads", sc.threads, "worker threads")->capture_default_str();
  sim->add_option("--out-dir", sim_out, "output directory")->capture_default_str();

  double cl_tau = 0.0;
  double cl_threshold = kDefaultRegimeThreshold;
  std::int64_t cl_n = 0;
  auto* cls = app.add_subcommand("classify", "intermediate or extreme regime for (tau, n)");
  cls->add_option("--tau", cl_tau, "quantile level")->required();
  cls->add_option("--n", cl_n, "sample size")->required();
  cls->add_option("--threshold", cl_threshold, "regime threshold on xi")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  auto parse_k = [](const std::string& text) -> int {
    if (text == "auto") return 0;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || v < 2)
      config_error("k: expected an integer >= 2 or 'auto', got '" + text + "'");
    return v;
  };
  auto parse_base = [](const std::string& text) -> BaseLevel {
    if (text == "first") return BaseLevel::First;
    if (text == "last") return BaseLevel::Last;
    config_error("base-level: expected 'first' or 'last', got '" + text + "'");
  };

  try {
    if (fit->parsed() || tail->parsed()) {
      if (lambda_text != "gacv") rc.lambda = parse_double(lambda_text, "lambda");
      if (tail->parsed()) {
        if (eta_opt->count() > 0) rc.eta = eta;
        rc.k = parse_k(k_text);
        rc.base_level = parse_base(base_text);
        cmd_tail(rc, out);
      } else {
        cmd_fit(rc, out);
      }
    } else if (sim->parsed()) {
      sc.scenarios.clear();
      for (const auto& s : scenario_text) sc.scenarios.push_back(parse_scenario(s));
      sc.estimators.clear();
      for (const auto& e : estimator_text) sc.estimators.push_back(parse_estimator(e));
      sc.k = parse_k(sim_k);
      sc.base_level = parse_base(sim_base);
      cmd_simulate(sc, sim_out, out);
    } else if (cls->parsed()) {
      cmd_classify(cl_tau, cl_n, cl_threshold, out);
    }
  } catch (const NonpositiveQuantileError& e) {
    err << "error: " << e.what() << '\n';
    const auto& xs = e.points();
    if (!xs.empty()) {
      err << "offending x (" << xs.size() << "):";
      for (std::size_t i = 0; i < std::min<std::size_t>(xs.size(), 20); ++i) err << ' ' << format_number(xs[i]);
      if (xs.size() > 20) err << " ...";
      err << '\n';
    }
    return exit_code(e.kind());
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace xqr
