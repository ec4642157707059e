#include "xqr/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "xqr/bspline.hpp"
#include "xqr/error.hpp"
#include "xqr/evt.hpp"
#include "xqr/extrapolate.hpp"
#include "xqr/rng.hpp"
#include "xqr/student_t.hpp"

namespace xqr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_unit(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    std::ostringstream os;
    os << "x = " << x << " lies outside [0, 1]";
    detail::fail(ErrorKind::OutOfDomain, os.str());
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Neumaier-compensated running sum.
struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  [[nodiscard]] double value() const { return sum + comp; }
};

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Quoted when the text could break the CSV row.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

// Truth tables, [level][grid point].
std::vector<std::vector<double>> truth_table(const StudyConfig& cfg, ScenarioTag tag,
                                             std::span<const double> grid) {
  std::vector<std::vector<double>> out;
  for (double tau : cfg.levels) {
    std::vector<double> row(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) row[i] = true_quantile(tag, tau, grid[i]);
    out.push_back(std::move(row));
  }
  return out;
}

std::size_t estimator_slot(const StudyConfig& cfg, Estimator e) {
  const auto it = std::find(cfg.estimators.begin(), cfg.estimators.end(), e);
  return static_cast<std::size_t>(it - cfg.estimators.begin());
}

ReplicationOutcome replicate(const StudyConfig& cfg, ScenarioTag tag, std::int64_t n, int r,
                             std::span<const double> grid,
                             const std::vector<std::vector<double>>& truth) {
  ReplicationOutcome out;
  out.scenario = tag;
  out.n = n;
  out.replication = r;
  out.seed = replication_seed(cfg.root_seed, static_cast<std::uint64_t>(r));
  out.ladder_lambda = kNaN;
  out.gamma_pooled = kNaN;
  const std::size_t n_levels = cfg.levels.size();
  const std::size_t n_est = cfg.estimators.size();
  out.ise.assign(n_levels, std::vector<double>(n_est, kNaN));
  out.fallback.assign(n_levels, std::vector<std::size_t>(n_est, 0));

  auto note = [&](const std::string& what, const std::exception& e) {
    out.errors.push_back(what + ": " + e.what());
  };

  const Dataset data = generate(tag, n, out.seed);
  const BasisSpec spec = make_basis(0.0, 1.0, cfg.knots, cfg.degree);
  const QuantileProblem problem(data.x, data.y, spec, cfg.penalty_order);
  const auto lambda_grid = default_lambda_grid(data.y, cfg.lambda_grid_size);

  const bool want_i = estimator_slot(cfg, Estimator::PseI) < n_est;
  const bool want_ladder = estimator_slot(cfg, Estimator::PseE) < n_est ||
                           estimator_slot(cfg, Estimator::PseEp) < n_est;

  // Ladder stage, shared by both extrapolated estimators.
  std::optional<QuantileLadder> ladder;
  std::vector<QuantileFitModel> ladder_fits;
  std::vector<double> gamma_grid;
  std::vector<char> gamma_valid;
  if (want_ladder) {
    try {
      const int k = cfg.k > 0 ? cfg.k : default_k(n);
      ladder = make_ladder(n, eta_for_xi(n, cfg.xi), k);
      LambdaChoice choice;
      choice.policy = LambdaPolicy::GacvFirstLevel;
      choice.grid = lambda_grid;
      auto result = fit_ladder(problem, *ladder, choice, cfg.solver);
      out.ladder_lambda = result.selection ? result.selection->lambda : kNaN;
      ladder_fits = std::move(result.fits);

      const auto sample = estimate_evi(ladder_fits, *ladder, data.x);
      out.gamma_pooled = sample.pooled;
      out.pooled_points = sample.valid_count;

      const auto values = ladder_values(ladder_fits, grid);
      gamma_grid.assign(grid.size(), kNaN);
      gamma_valid.assign(grid.size(), 0);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::all_of(values[i].begin(), values[i].end(), [](double q) { return q > 0.0; })) {
          gamma_grid[i] = hill_from_quantiles(values[i], grid[i]);
          gamma_valid[i] = 1;
        }
      }
    } catch (const std::exception& e) {
      note("ladder", e);
      ladder.reset();
      ladder_fits.clear();
    }
  }

  for (std::size_t l = 0; l < n_levels; ++l) {
    const double tau = cfg.levels[l];
    if (want_i) {
      const std::size_t s = estimator_slot(cfg, Estimator::PseI);
      try {
        const auto sel = select_lambda_gacv(problem, tau, lambda_grid, cfg.solver);
        const auto est = predict(sel.selected_fit(), grid);
        out.ise[l][s] = mise(grid, est, truth[l]);
      } catch (const std::exception& e) {
        note(std::string("PSE-I at tau = ") + format_double(tau), e);
      }
    }
    if (!want_ladder || ladder_fits.empty()) continue;

    const int j = base_level_index(*ladder, tau, cfg.base_level);
    if (j < 0) {
      out.errors.push_back("extrapolation at tau = " + format_double(tau) +
                           ": no admissible ladder level lies below the target");
      continue;
    }
    const double tau_i = ladder->levels[static_cast<std::size_t>(j)];
    const auto base = predict(ladder_fits[static_cast<std::size_t>(j)], grid);

    for (Estimator e : {Estimator::PseE, Estimator::PseEp}) {
      const std::size_t s = estimator_slot(cfg, e);
      if (s >= n_est) continue;
      std::size_t fallback = 0;
      std::vector<double> gamma(grid.size(), out.gamma_pooled);
      if (e == Estimator::PseE) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
          if (gamma_valid[i])
            gamma[i] = gamma_grid[i];
          else
            ++fallback;
        }
      }
      try {
        const auto ext = extrapolate_values(grid, base, tau_i, gamma, tau,
                                            e == Estimator::PseE ? EviSource::Pointwise
                                                                 : EviSource::Pooled);
        std::vector<double> values = ext.values;
        for (std::size_t i = 0; i < grid.size(); ++i) {
          if (ext.refused[i]) {
            values[i] = base[i];
            ++fallback;
          }
        }
        out.ise[l][s] = mise(grid, values, truth[l]);
        out.fallback[l][s] = fallback;
      } catch (const std::exception& ex) {
        note(std::string(to_string(e)) + " at tau = " + format_double(tau), ex);
      }
    }
  }
  return out;
}

}  // namespace

const char* to_string(ScenarioTag tag) noexcept { return tag == ScenarioTag::B ? "B" : "A"; }

ScenarioTag parse_scenario(std::string_view text) {
  const auto s = lower(text);
  if (s == "a") return ScenarioTag::A;
  if (s == "b") return ScenarioTag::B;
  detail::fail(ErrorKind::Config, "scenario: expected A or B, got '" + std::string(text) + "'");
}

double scenario_f(double x) {
  require_unit(x);
  const double c = std::pow(2.0, -1.4);
  return std::sqrt(x * (1.0 - x)) * std::sin(2.0 * std::numbers::pi * (1.0 + c) / (x + c));
}

double scenario_sigma(double x) {
  require_unit(x);
  return (1.0 + x) / 10.0;
}

int scenario_dof(double x) {
  require_unit(x);
  const double d = x - 0.5;
  const double nu =
      1.0 / ((1.1 - 0.5 * std::exp(-64.0 * d * d)) * (0.1 + std::sin(std::numbers::pi * x)));
  return static_cast<int>(std::floor(nu)) + 1;
}

int SimScenario::dof(double x) const { return tag == ScenarioTag::A ? 5 : scenario_dof(x); }

Dataset generate(ScenarioTag tag, std::int64_t n, std::uint64_t seed) {
  if (n < 1) detail::fail(ErrorKind::InvalidSize, "sample size must be >= 1");
  Dataset data;
  data.seed = seed;
  data.tag = tag;
  data.x.resize(static_cast<std::size_t>(n));
  data.y.resize(static_cast<std::size_t>(n));
  const SimScenario sc{tag};
  Rng rng(seed);
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const double x = rng.uniform();
    const double eps = rng.student_t(sc.dof(x));
    data.x[i] = x;
    data.y[i] = sc.mean(x) + sc.scale(x) * eps;
  }
  return data;
}

double true_quantile(ScenarioTag tag, double tau, double x) {
  detail::require_level(tau, "tau");
  const SimScenario sc{tag};
  return sc.mean(x) + sc.scale(x) * student_t_quantile(tau, sc.dof(x));
}

std::vector<double> uniform_grid(double a, double b, int points) {
  if (points < 1) detail::fail(ErrorKind::InvalidSize, "grid needs at least one point");
  if (!(a <= b)) detail::fail(ErrorKind::InvalidDomain, "grid bounds are reversed");
  std::vector<double> g(static_cast<std::size_t>(points));
  if (points == 1) {
    g[0] = a;
    return g;
  }
  const double h = (b - a) / (points - 1);
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = a + h * i;
  g.back() = b;
  return g;
}

double mise(std::span<const double> grid, std::span<const double> estimate,
            std::span<const double> truth) {
  if (estimate.size() != grid.size() || truth.size() != grid.size())
    detail::fail(ErrorKind::InvalidSize, "grid, estimate and truth must have equal lengths");
  if (grid.size() < 2) return 0.0;
  Accumulator acc;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double e0 = estimate[i - 1] - truth[i - 1];
    const double e1 = estimate[i] - truth[i];
    acc.add(0.5 * (grid[i] - grid[i - 1]) * (e0 * e0 + e1 * e1));
  }
  return acc.value();
}

double mise(const std::function<double(double)>& estimate, const std::function<double(double)>& truth,
            std::span<const double> grid) {
  std::vector<double> e(grid.size()), t(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    e[i] = estimate(grid[i]);
    t[i] = truth(grid[i]);
  }
  return mise(grid, e, t);
}

const char* to_string(Estimator e) noexcept {
  switch (e) {
    case Estimator::PseI: return "PSE-I";
    case Estimator::PseE: return "PSE-E";
    case Estimator::PseEp: return "PSE-Ep";
  }
  return "?";
}

Estimator parse_estimator(std::string_view text) {
  const auto s = lower(text);
  if (s == "pse-i" || s == "i") return Estimator::PseI;
  if (s == "pse-e" || s == "e") return Estimator::PseE;
  if (s == "pse-ep" || s == "ep") return Estimator::PseEp;
  detail::fail(ErrorKind::Config,
               "estimator: expected PSE-I, PSE-E or PSE-Ep, got '" + std::string(text) + "'");
}

void StudyConfig::validate() const {
  auto bad = [](const std::string& msg) { detail::fail(ErrorKind::Config, msg); };
  if (scenarios.empty()) bad("scenario: at least one scenario is required");
  if (sample_sizes.empty()) bad("n: at least one sample size is required");
  for (auto n : sample_sizes)
    if (n < 2) bad("n: sample sizes must be >= 2");
  if (levels.empty()) bad("tau: at least one level is required");
  for (double t : levels)
    if (!(t > 0.0 && t < 1.0)) bad("tau: levels must lie in (0, 1), got " + format_double(t));
  if (estimators.empty()) bad("estimators: at least one estimator is required");
  if (replications < 1) bad("replications: must be >= 1");
  if (knots < 1) bad("knots: must be >= 1");
  if (degree < 1) bad("degree: must be >= 1");
  if (penalty_order < 1 || penalty_order > degree) bad("penalty-order: must lie in [1, degree]");
  if (!(xi > 0.0)) bad("xi: must be > 0");
  if (k < 0 || k == 1) bad("k: must be >= 2 (or 0 for the default)");
  if (grid_points < 2) bad("grid-points: must be >= 2");
  if (lambda_grid_size < 1) bad("lambda grid: must have at least one value");
  if (threads < 1) bad("threads: must be >= 1");
  solver.validate();
}

const StudyRow* StudyReport::find(ScenarioTag s, std::int64_t n, double tau, Estimator e) const {
  for (const auto& row : rows)
    if (row.scenario == s && row.n == n && row.tau == tau && row.estimator == e) return &row;
  return nullptr;
}

ReplicationOutcome run_replication(const StudyConfig& config, ScenarioTag scenario, std::int64_t n,
                                   int replication) {
  config.validate();
  const auto grid = uniform_grid(0.0, 1.0, config.grid_points);
  const auto truth = truth_table(config, scenario, grid);
  return replicate(config, scenario, n, replication, grid, truth);
}

StudyReport run_study(const StudyConfig& config) {
  config.validate();
  const auto grid = uniform_grid(0.0, 1.0, config.grid_points);
  std::vector<std::vector<std::vector<double>>> truths;
  for (auto tag : config.scenarios) truths.push_back(truth_table(config, tag, grid));

  struct Task {
    std::size_t scenario;
    std::int64_t n;
    int r;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < config.scenarios.size(); ++s)
    for (auto n : config.sample_sizes)
      for (int r = 0; r < config.replications; ++r) tasks.push_back({s, n, r});

  StudyReport report;
  report.replications.resize(tasks.size());
  std::vector<std::exception_ptr> crashes(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const auto& task = tasks[t];
      try {
        report.replications[t] = replicate(config, config.scenarios[task.scenario], task.n, task.r,
                                           grid, truths[task.scenario]);
      } catch (...) {
        crashes[t] = std::current_exception();
      }
    }
  };
  const int workers = std::min<int>(config.threads, static_cast<int>(tasks.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& c : crashes)
    if (c) std::rethrow_exception(c);

  std::size_t offset = 0;
  for (auto tag : config.scenarios) {
    for (auto n : config.sample_sizes) {
      const std::span<const ReplicationOutcome> reps(report.replications.data() + offset,
                                                     static_cast<std::size_t>(config.replications));
      offset += reps.size();
      for (std::size_t l = 0; l < config.levels.size(); ++l) {
        for (std::size_t s = 0; s < config.estimators.size(); ++s) {
          StudyRow row;
          row.scenario = tag;
          row.n = n;
          row.tau = config.levels[l];
          row.estimator = config.estimators[s];
          row.replications = config.replications;
          Accumulator sum;
          int ok = 0;
          for (const auto& rep : reps) {
            const double v = rep.ise[l][s];
            if (std::isfinite(v)) {
              sum.add(v);
              ++ok;
            } else {
              ++row.failures;
            }
            row.fallback_points += rep.fallback[l][s];
          }
          row.mise = ok > 0 ? sum.value() / ok : kNaN;
          if (ok > 1) {
            Accumulator sq;
            for (const auto& rep : reps) {
              const double v = rep.ise[l][s];
              if (std::isfinite(v)) sq.add((v - row.mise) * (v - row.mise));
            }
            row.mc_stderr = std::sqrt(sq.value() / (ok - 1) / ok);
          } else {
            row.mc_stderr = kNaN;
          }
          report.rows.push_back(row);
        }
      }
    }
  }
  return report;
}

void write_report_csv(const StudyReport& report, std::ostream& os) {
  os << "scenario,n,tau,estimator,replications,mise,mc_stderr,failures\n";
  for (const auto& r : report.rows) {
    os << to_string(r.scenario) << ',' << r.n << ',' << format_double(r.tau) << ','
       << to_string(r.estimator) << ',' << r.replications << ',' << format_double(r.mise) << ','
       << format_double(r.mc_stderr) << ',' << r.failures << '\n';
  }
}

void write_replications_csv(const StudyReport& report, std::ostream& os) {
  os << "scenario,n,replication,seed,lambda,gamma_pooled,pooled_points,errors\n";
  for (const auto& r : report.replications) {
    std::string errors;
    for (const auto& e : r.errors) errors += (errors.empty() ? "" : "; ") + e;
    os << to_string(r.scenario) << ',' << r.n << ',' << r.replication << ',' << r.seed << ','
       << format_double(r.ladder_lambda) << ',' << format_double(r.gamma_pooled) << ','
       << r.pooled_points << ',' << csv_field(errors) << '\n';
  }
}

}  // namespace xqr
