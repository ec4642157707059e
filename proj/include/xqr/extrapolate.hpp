#pragma once

#include <span>
#include <vector>

#include "xqr/model.hpp"

namespace xqr {

enum class EviSource { Pointwise, Pooled };

const char* to_string(EviSource source) noexcept;

/// ((1 - tau_i) / (1 - tau_e))^gamma.
double weissman_factor(double tau_i, double tau_e, double gamma);

/// Extrapolated estimates q(tau_e | x) = factor(x) * q(tau_i | x).
/// Points where the base estimate is not positive are refused: value NaN,
/// refused flag set.
struct ExtremeQuantileEstimate {
  double base_level = 0.0;
  double target_level = 0.0;
  EviSource source = EviSource::Pointwise;
  std::vector<double> xs;
  std::vector<double> base_values;
  std::vector<double> gamma;
  std::vector<double> factors;
  std::vector<double> values;
  std::vector<char> refused;
  std::size_t refused_count = 0;
  std::size_t negative_gamma_count = 0;  ///< passed through, factor < 1
};

ExtremeQuantileEstimate extrapolate_pointwise(const QuantileFitModel& base,
                                              std::span<const double> gamma, double tau_e,
                                              std::span<const double> xs);

ExtremeQuantileEstimate extrapolate_pooled(const QuantileFitModel& base, double gamma_pooled,
                                           double tau_e, std::span<const double> xs);

/// Same arithmetic on precomputed base values, for callers that already hold
/// q(tau_i | x). Enforces tau_i < tau_e < 1.
ExtremeQuantileEstimate extrapolate_values(std::span<const double> xs,
                                           std::span<const double> base_values, double tau_i,
                                           std::span<const double> gamma, double tau_e,
                                           EviSource source);

}  // namespace xqr
