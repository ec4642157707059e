#include "xqr/checkloss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "xqr/error.hpp"

namespace xqr {

double pinball(double tau, double u) {
  detail::require_level(tau);
  return detail::pinball_unchecked(tau, u);
}

SmoothedLoss smoothed_pinball(const LossParams& params, double u) {
  detail::require_level(params.tau);
  const double alpha = params.alpha;
  if (!(alpha > 0.0)) {
    std::ostringstream os;
    os << "smoothing width alpha must be > 0, got " << alpha;
    detail::fail(ErrorKind::InvalidWidth, os.str());
  }
  const double tau = params.tau;
  const double w = detail::irls_weight_unchecked(tau, alpha, u);
  if (u > alpha || u < -alpha) return {detail::pinball_unchecked(tau, u), w};
  return {(u >= 0.0 ? tau : 1.0 - tau) * u * u / alpha, w};
}

double objective(std::span<const double> xs, std::span<const double> ys,
                 const QuantileFitModel& model, double lambda, const Eigen::MatrixXd& penalty,
                 double alpha) {
  if (xs.size() != ys.size()) detail::fail(ErrorKind::InvalidSize, "x and y lengths differ");
  if (alpha < 0.0) detail::fail(ErrorKind::InvalidWidth, "alpha must be >= 0");
  if (lambda < 0.0) detail::fail(ErrorKind::InvalidArgument, "lambda must be >= 0");
  const auto fitted = predict(model, xs);
  double loss = 0.0;
  const LossParams params{model.tau, alpha};
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double u = ys[i] - fitted[i];
    loss += alpha == 0.0 ? pinball(model.tau, u) : smoothed_pinball(params, u).value;
  }
  double pen = 0.0;
  if (lambda > 0.0) pen = model.coefficients.dot(penalty * model.coefficients);
  return loss + lambda * pen;
}

}  // namespace xqr
