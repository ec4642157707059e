#include "xqr/extrapolate.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "xqr/error.hpp"

namespace xqr {

const char* to_string(EviSource source) noexcept {
  return source == EviSource::Pooled ? "pooled" : "pointwise";
}

double weissman_factor(double tau_i, double tau_e, double gamma) {
  return std::pow((1.0 - tau_i) / (1.0 - tau_e), gamma);
}

ExtremeQuantileEstimate extrapolate_values(std::span<const double> xs,
                                           std::span<const double> base_values, double tau_i,
                                           std::span<const double> gamma, double tau_e,
                                           EviSource source) {
  detail::require_level(tau_i, "base level tau_I");
  detail::require_level(tau_e, "target level tau_E");
  if (!(tau_e > tau_i)) {
    std::ostringstream os;
    os << "target level tau_E = " << tau_e << " must exceed base level tau_I = " << tau_i;
    detail::fail(ErrorKind::LevelOrder, os.str());
  }
  if (base_values.size() != xs.size() || gamma.size() != xs.size())
    detail::fail(ErrorKind::InvalidSize, "xs, base values and gamma must have equal lengths");

  ExtremeQuantileEstimate est;
  est.base_level = tau_i;
  est.target_level = tau_e;
  est.source = source;
  est.xs.assign(xs.begin(), xs.end());
  est.base_values.assign(base_values.begin(), base_values.end());
  est.gamma.assign(gamma.begin(), gamma.end());
  est.factors.resize(xs.size());
  est.values.resize(xs.size());
  est.refused.assign(xs.size(), 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(gamma[i])) {
      std::ostringstream os;
      os << "extreme value index at x = " << xs[i] << " is not finite";
      detail::fail(ErrorKind::InvalidArgument, os.str());
    }
    if (gamma[i] < 0.0) ++est.negative_gamma_count;
    est.factors[i] = weissman_factor(tau_i, tau_e, gamma[i]);
    if (base_values[i] > 0.0) {
      est.values[i] = est.factors[i] * base_values[i];
    } else {
      est.values[i] = std::numeric_limits<double>::quiet_NaN();
      est.refused[i] = 1;
      ++est.refused_count;
    }
  }
  return est;
}

ExtremeQuantileEstimate extrapolate_pointwise(const QuantileFitModel& base,
                                              std::span<const double> gamma, double tau_e,
                                              std::span<const double> xs) {
  const auto q = predict(base, xs);
  return extrapolate_values(xs, q, base.tau, gamma, tau_e, EviSource::Pointwise);
}

ExtremeQuantileEstimate extrapolate_pooled(const QuantileFitModel& base, double gamma_pooled,
                                           double tau_e, std::span<const double> xs) {
  const auto q = predict(base, xs);
  const std::vector<double> gamma(xs.size(), gamma_pooled);
  return extrapolate_values(xs, q, base.tau, gamma, tau_e, EviSource::Pooled);
}

}  // namespace xqr
