#pragma once

#include <span>

#include <Eigen/Dense>

#include "xqr/model.hpp"

namespace xqr {

struct LossParams {
  double tau = 0.5;
  double alpha = 0.1;  ///< smoothing half-width, response units
};

/// Koenker's check loss: tau*u for u >= 0, (tau - 1)*u otherwise.
double pinball(double tau, double u);

struct SmoothedLoss {
  double value;
  double weight;  ///< IRLS weight w with rho'(u) = 2 w(u) u
};

/// Quadratic inside [-alpha, alpha], pinball outside. The two pieces agree
/// in value at u = +-alpha but not in slope (2*tau vs tau on the right).
///
/// Weights: tau/alpha on [0, alpha], (1-tau)/alpha on [-alpha, 0), and
/// {tau, 1-tau} / (2 max(|u|, alpha)) in the linear region.
SmoothedLoss smoothed_pinball(const LossParams& params, double u);

namespace detail {

// Unchecked kernels for solver inner loops; callers validate tau and alpha.
inline double pinball_unchecked(double tau, double u) noexcept {
  return u >= 0.0 ? tau * u : (tau - 1.0) * u;
}

inline double irls_weight_unchecked(double tau, double alpha, double u) noexcept {
  if (u > alpha) return tau / (2.0 * u);
  if (u < -alpha) return (1.0 - tau) / (-2.0 * u);
  return (u >= 0.0 ? tau : 1.0 - tau) / alpha;
}

}  // namespace detail

/// Sum of rho_{tau,alpha}(y_i - q(x_i)) + lambda b^T P b. alpha == 0 uses the
/// exact check loss.
double objective(std::span<const double> xs, std::span<const double> ys,
                 const QuantileFitModel& model, double lambda, const Eigen::MatrixXd& penalty,
                 double alpha);

}  // namespace xqr
