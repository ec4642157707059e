/**
 * @file evt.hpp
 * @brief Intermediate quantile ladders, Hill-type extreme value index
 *        estimates and the xi = (1 - tau) n regime rule of thumb.
 *
 * Ladder levels are tau_j = 1 - (floor(n^eta) + j) / (n + 1), j = 1..k.
 * The tail counts floor(n^eta) + j are kept as integers so the levels
 * never drift.
 */
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xqr/model.hpp"

namespace xqr {

struct QuantileLadder {
  std::int64_t n = 0;
  double eta = 0.0;
  int k = 0;
  std::int64_t base = 0;       ///< floor(n^eta)
  std::vector<double> levels;  ///< tau_1 > ... > tau_k

  /// (1 - tau_j)(n + 1) for 1-based j, exact.
  [[nodiscard]] std::int64_t tail_count(int j) const noexcept { return base + j; }
};

/// floor(n^eta), snapping values within a few ulps of an integer first.
std::int64_t floor_power(std::int64_t n, double eta);

/// floor(7.5 n^(1/3)).
int default_k(std::int64_t n);

/// Exponent giving (1 - tau_1) n ~= xi, i.e. floor(n^eta) = round(xi (n+1)/n - 1)
/// (at least 1). Picks eta in the middle of the admissible interval.
double eta_for_xi(std::int64_t n, double xi);

QuantileLadder make_ladder(std::int64_t n, double eta, int k);

enum class BaseLevel {
  First,  ///< tau_1, or the highest ladder level below tau_e when tau_1 >= tau_e
  Last,   ///< tau_k
};

const char* to_string(BaseLevel rule) noexcept;

/// 0-based ladder index of the extrapolation base for target tau_e, or -1
/// when no admissible level lies below tau_e.
int base_level_index(const QuantileLadder& ladder, double tau_e, BaseLevel rule = BaseLevel::First);

/// Mean of log(q_j / q_k) over j < k for ladder-ordered values q_1..q_k.
/// Throws NonpositiveQuantileError (x reported as `x`) if any q_j <= 0.
double hill_from_quantiles(std::span<const double> quantiles, double x = 0.0);

/// Pointwise gamma(x) from a ladder of fits ordered tau_1 > ... > tau_k.
double hill_pointwise(std::span<const QuantileFitModel> fits, double x);

/// Mean of gamma(x_i) over the pooling points. Strict: any point with a
/// nonpositive ladder estimate aborts with the full list of failures.
double hill_pooled(std::span<const QuantileFitModel> fits, std::span<const double> xs);

struct EviEstimate {
  std::vector<double> xs;
  std::vector<double> gamma;  ///< NaN where invalid
  std::vector<char> valid;    ///< 1 where every ladder estimate was positive
  double pooled = 0.0;        ///< mean of gamma over valid points
  std::size_t valid_count = 0;
  QuantileLadder ladder;

  [[nodiscard]] std::vector<double> invalid_points() const;
};

/// Masked variant: evaluates gamma(x) wherever the ladder estimates are all
/// positive and pools over those points. Throws NonpositiveQuantileError
/// only when no point is valid.
EviEstimate estimate_evi(std::span<const QuantileFitModel> fits, const QuantileLadder& ladder,
                         std::span<const double> xs);

/// Ladder quantile values at each x: result[i][j] = q(tau_{j+1} | xs[i]).
std::vector<std::vector<double>> ladder_values(std::span<const QuantileFitModel> fits,
                                               std::span<const double> xs);

/// Pooled estimate using only the first `k_used` ladder levels, for every
/// k_used = 2..k (the EVI sample path). Points invalid for a given k_used
/// are skipped for that k_used. NaN entries mean no valid point remained.
std::vector<double> pooled_sample_path(const std::vector<std::vector<double>>& values);

enum class Regime { Intermediate, Extreme };

const char* to_string(Regime regime) noexcept;

struct RegimeVerdict {
  Regime regime = Regime::Intermediate;
  double xi = 0.0;
  double threshold = 30.0;
};

inline constexpr double kDefaultRegimeThreshold = 30.0;

/// xi = (1 - tau) n; Extreme iff xi < threshold.
RegimeVerdict classify_regime(double tau, std::int64_t n,
                              double threshold = kDefaultRegimeThreshold);

}  // namespace xqr
