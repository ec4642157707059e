#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "xqr/bspline.hpp"

namespace xqr {

struct SolverDiagnostics {
  int iterations = 0;      ///< outer proximal steps taken on the schedule
  int polish_iterations = 0;  ///< steps taken in the polishing phase
  int inner_solves = 0;    ///< weighted ridge solves across all steps
  bool converged = false;  ///< false when an iteration cap was reached
  double final_alpha = 0.0;
  double final_eta = 0.0;
  double initial_objective = 0.0;  ///< exact pinball + penalty at the start
  double objective = 0.0;          ///< exact pinball + penalty at the result
  double last_step = 0.0;          ///< sup-norm of the final coefficient change
};

/// Fitted penalized B-spline quantile curve q(tau | x) = B(x)^T b.
struct QuantileFitModel {
  BasisSpec basis;
  double tau = 0.5;
  double lambda = 0.0;
  int penalty_order = 2;
  Eigen::VectorXd coefficients;
  SolverDiagnostics diagnostics;

  [[nodiscard]] double operator()(double x) const;
};

/// design_matrix(basis, xs) * coefficients.
std::vector<double> predict(const QuantileFitModel& model, std::span<const double> xs);

}  // namespace xqr
