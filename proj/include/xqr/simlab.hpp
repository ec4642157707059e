/**
 * @file simlab.hpp
 * @brief Monte Carlo laboratory: heavy-tailed location-scale scenarios,
 *        their true conditional quantiles, and seeded MISE studies of the
 *        intermediate (PSE-I) and extrapolated (PSE-E, PSE-Ep) estimators.
 *
 * Y = f(X) + sigma(X) eps(X), X ~ U(0, 1), with
 *   f(x)     = sqrt(x(1-x)) sin(2 pi (1 + 2^{-7/5}) / (x + 2^{-7/5}))
 *   sigma(x) = (1 + x) / 10
 *   eps      ~ t_5 (scenario A) or t_{s(x)} (scenario B),
 *   s(x)     = floor(nu(x)) + 1,
 *   nu(x)    = 1 / ({1.1 - 0.5 exp(-64 (x - 0.5)^2)} {0.1 + sin(pi x)}).
 */
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xqr/fitter.hpp"

namespace xqr {

enum class ScenarioTag { A, B };

const char* to_string(ScenarioTag tag) noexcept;
/// Accepts "A"/"B" (case-insensitive); Config error naming "scenario" otherwise.
ScenarioTag parse_scenario(std::string_view text);

double scenario_f(double x);
double scenario_sigma(double x);
/// s(x) of scenario B.
int scenario_dof(double x);

struct SimScenario {
  ScenarioTag tag = ScenarioTag::A;

  [[nodiscard]] double mean(double x) const { return scenario_f(x); }
  [[nodiscard]] double scale(double x) const { return scenario_sigma(x); }
  [[nodiscard]] int dof(double x) const;
  [[nodiscard]] double evi(double x) const { return 1.0 / dof(x); }
};

struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  std::uint64_t seed = 0;
  ScenarioTag tag = ScenarioTag::A;
};

/// Deterministic in (tag, n, seed). Per observation: x = uniform, then one
/// t draw with the scenario's dof at x.
Dataset generate(ScenarioTag tag, std::int64_t n, std::uint64_t seed);

/// f(x) + sigma(x) Q_t(tau; dof(x)).
double true_quantile(ScenarioTag tag, double tau, double x);

/// `points` equally spaced values on [a, b].
std::vector<double> uniform_grid(double a, double b, int points);

/// Trapezoidal integral of (estimate - truth)^2 over the grid.
double mise(std::span<const double> grid, std::span<const double> estimate,
            std::span<const double> truth);
double mise(const std::function<double(double)>& estimate, const std::function<double(double)>& truth,
            std::span<const double> grid);

enum class Estimator { PseI, PseE, PseEp };

const char* to_string(Estimator e) noexcept;
Estimator parse_estimator(std::string_view text);

struct StudyConfig {
  std::vector<ScenarioTag> scenarios{ScenarioTag::A};
  std::vector<std::int64_t> sample_sizes{200, 1000};
  std::vector<double> levels{0.9, 0.995};
  std::vector<Estimator> estimators{Estimator::PseI, Estimator::PseE, Estimator::PseEp};
  int replications = 100;
  std::uint64_t root_seed = 20240229;
  int knots = 40;
  int degree = 3;
  int penalty_order = 2;
  double xi = 3.0;          ///< ladder placement: (1 - tau_1) n ~= xi
  int k = 0;                ///< ladder length; 0 means floor(7.5 n^(1/3))
  BaseLevel base_level = BaseLevel::First;
  int grid_points = 401;    ///< MISE grid on [0, 1]
  int lambda_grid_size = 30;
  SolverConfig solver;
  int threads = 1;

  void validate() const;
};

/// Integrated squared errors of one replication, indexed [level][estimator]
/// in config order. NaN marks a failed estimate.
struct ReplicationOutcome {
  ScenarioTag scenario = ScenarioTag::A;
  std::int64_t n = 0;
  int replication = 0;
  std::uint64_t seed = 0;
  double ladder_lambda = 0.0;                 ///< GACV choice at tau_1 (NaN without a ladder)
  double gamma_pooled = 0.0;                  ///< pooled EVI over the sample (NaN on failure)
  std::size_t pooled_points = 0;              ///< sample points entering the pooled EVI
  std::vector<std::vector<double>> ise;
  std::vector<std::vector<std::size_t>> fallback;  ///< grid points needing a fallback value
  std::vector<std::string> errors;
};

struct StudyRow {
  ScenarioTag scenario = ScenarioTag::A;
  std::int64_t n = 0;
  double tau = 0.0;
  Estimator estimator = Estimator::PseI;
  int replications = 0;  ///< as configured
  double mise = 0.0;     ///< mean ISE over successful replications
  double mc_stderr = 0.0;
  int failures = 0;
  std::size_t fallback_points = 0;
};

struct StudyReport {
  std::vector<StudyRow> rows;
  std::vector<ReplicationOutcome> replications;  ///< scenario-major, then n, then r

  [[nodiscard]] const StudyRow* find(ScenarioTag s, std::int64_t n, double tau, Estimator e) const;
};

/// One replication, exactly as run_study performs it.
ReplicationOutcome run_replication(const StudyConfig& config, ScenarioTag scenario, std::int64_t n,
                                   int replication);

StudyReport run_study(const StudyConfig& config);

/// Columns: scenario,n,tau,estimator,replications,mise,mc_stderr,failures
void write_report_csv(const StudyReport& report, std::ostream& os);

/// Per-replication detail: scenario,n,replication,seed,lambda,gamma_pooled,pooled_points,errors
void write_replications_csv(const StudyReport& report, std::ostream& os);

}  // namespace xqr
