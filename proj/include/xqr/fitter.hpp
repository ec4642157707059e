/**
 * @file fitter.hpp
 * @brief Penalized B-spline quantile regression by proximal IRLS.
 *
 * Each outer step t solves
 *
 *   argmin_b  sum_i rho_{tau,alpha_t}(y_i - B(x_i)^T b) + lambda b^T P b
 *             + eta_t ||b - b^(t)||^2
 *
 * by iteratively reweighted ridge solves, with alpha_t shrinking and eta_t
 * growing geometrically. The start is the lambda-penalized least-squares fit.
 * After the schedule, a polishing phase repeats the step at alpha_floor with
 * eta held at eta0 until the coefficients stop moving, so the result does not
 * depend on the start.
 */
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xqr/bspline.hpp"
#include "xqr/evt.hpp"
#include "xqr/model.hpp"

namespace xqr {

struct SolverConfig {
  double alpha0 = 0.1;          ///< initial smoothing width (response units)
  double alpha_decay = 0.5;     ///< alpha_t = alpha0 * decay^t
  double alpha_floor = 1e-10;   ///< alpha_t never drops below this
  double eta0 = 1.0;            ///< initial proximal weight
  double eta_growth = 1.2;      ///< eta_{t+1} = growth * eta_t
  int max_iterations = 60;      ///< T_max
  double coef_tol = 1e-6;       ///< stop when ||b^(t+1) - b^(t)||_inf < coef_tol
  double objective_tol = 1e-12; ///< or when the exact objective stalls (relative)
  int max_inner = 20;           ///< weighted ridge solves per outer step
  int polish_iterations = 200;  ///< steps at alpha_floor with eta reset to eta0; 0 disables

  void validate() const;
};

/// Data plus basis and penalty, prepared once and shared by many fits
/// (lambda grids, ladders). Immutable after construction.
class QuantileProblem {
 public:
  /// For degree-0 bases there is no admissible penalty order; the penalty is
  /// identically zero and only lambda == 0 fits are allowed.
  QuantileProblem(std::span<const double> xs, std::span<const double> ys, BasisSpec spec,
                  int penalty_order);

  [[nodiscard]] QuantileFitModel fit(double tau, double lambda, const SolverConfig& cfg = {},
                                     const Eigen::VectorXd* start = nullptr) const;

  /// (Z^T Z + lambda P)^{-1} Z^T y.
  [[nodiscard]] Eigen::VectorXd least_squares(double lambda) const;

  /// trace{Z (Z^T W Z + lambda P)^{-1} Z^T W} at the converged IRLS
  /// weights of `model` (alpha from its diagnostics).
  [[nodiscard]] double effective_df(const QuantileFitModel& model) const;

  /// Exact pinball loss plus lambda b^T P b.
  [[nodiscard]] double exact_objective(double tau, double lambda, const Eigen::VectorXd& coef) const;

  [[nodiscard]] const BasisSpec& basis() const noexcept { return spec_; }
  [[nodiscard]] const Eigen::MatrixXd& penalty() const noexcept { return penalty_; }
  [[nodiscard]] int penalty_order() const noexcept { return order_; }
  [[nodiscard]] std::span<const double> xs() const noexcept { return xs_; }
  [[nodiscard]] std::span<const double> ys() const noexcept { return ys_; }
  [[nodiscard]] int size() const noexcept { return design_.rows; }

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  BasisSpec spec_;
  int order_;
  SparseDesign design_;
  std::vector<double> products_;      ///< per row, lower triangle of v v^T
  Eigen::MatrixXd penalty_;
  std::vector<double> penalty_band_;  ///< (p+1) diagonals of P, row-major per row
};

/// One proximal-IRLS fit. `start` overrides the least-squares start.
QuantileFitModel fit_intermediate(std::span<const double> xs, std::span<const double> ys, double tau,
                                  double lambda, const BasisSpec& spec, int penalty_order,
                                  const SolverConfig& cfg = {},
                                  const Eigen::VectorXd* start = nullptr);

struct GacvResult {
  double lambda = 0.0;         ///< selected value
  std::vector<double> grid;    ///< as given
  std::vector<double> scores;  ///< +inf for degenerate df >= n, NaN for failed fits
  std::vector<double> df;
  std::vector<QuantileFitModel> fits;  ///< one per grid point; meaningless where failed
  std::vector<char> failed;
  std::vector<std::string> errors;     ///< failure messages, empty where the fit succeeded
  [[nodiscard]] const QuantileFitModel& selected_fit() const;
};

/// GACV(lambda) = sum_i rho_tau(y_i - q(x_i)) / (n - df(lambda)). Ties go to
/// the larger lambda. `threads` > 1 evaluates grid points concurrently with
/// results identical to the sequential run.
GacvResult select_lambda_gacv(const QuantileProblem& problem, double tau,
                              std::span<const double> lambda_grid, const SolverConfig& cfg = {},
                              int threads = 1);

GacvResult select_lambda_gacv(std::span<const double> xs, std::span<const double> ys, double tau,
                              const BasisSpec& spec, int penalty_order,
                              std::span<const double> lambda_grid, const SolverConfig& cfg = {});

/// Robust response scale: 1.4826 * MAD, falling back to the standard
/// deviation and then to 1.
double response_scale(std::span<const double> ys);

/// `count` log-spaced values in [lo, hi] / response_scale(ys). The penalty is
/// quadratic in the coefficients while the loss is linear in y, so lambda
/// carries units of 1/y.
std::vector<double> default_lambda_grid(std::span<const double> ys, int count = 30, double lo = 1e-4,
                                        double hi = 1e4);

enum class LambdaPolicy {
  Fixed,          ///< use LambdaChoice::value everywhere
  GacvFirstLevel, ///< select at tau_1, reuse across the ladder
  GacvEachLevel,  ///< select separately at every level
};

struct LambdaChoice {
  LambdaPolicy policy = LambdaPolicy::GacvFirstLevel;
  double value = 1.0;               ///< used by Fixed
  std::vector<double> grid;         ///< empty: default_lambda_grid(ys)
};

struct LadderFitResult {
  std::vector<QuantileFitModel> fits;  ///< one per ladder level, tau_1 first
  std::optional<GacvResult> selection; ///< GACV at tau_1 when that policy ran
};

/// Fits every ladder level. Each fit warm-starts from the previous level's
/// coefficients unless `warm_start` is false. Errors name the failing level.
LadderFitResult fit_ladder(const QuantileProblem& problem, const QuantileLadder& ladder,
                           const LambdaChoice& lambda, const SolverConfig& cfg = {},
                           bool warm_start = true);

std::vector<QuantileFitModel> fit_ladder(std::span<const double> xs, std::span<const double> ys,
                                         const QuantileLadder& ladder, const LambdaChoice& lambda,
                                         const BasisSpec& spec, int penalty_order,
                                         const SolverConfig& cfg = {}, bool warm_start = true);

/// For each adjacent pair (tau_j, tau_{j+1}), the fraction of grid points at
/// which q(tau_j | x) >= q(tau_{j+1} | x). Diagnostic only.
std::vector<double> ladder_monotonicity(std::span<const QuantileFitModel> fits,
                                        std::span<const double> grid);

/// Warning hook for soft precondition violations (n < K + p). Defaults to
/// writing to stderr; set to an empty function to silence.
void set_warning_handler(std::function<void(const std::string&)> handler);

}  // namespace xqr
