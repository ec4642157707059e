#include "xqr/evt.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "xqr/error.hpp"

namespace xqr {

namespace {

// Values that are integers up to floating-point noise are snapped, so that
// e.g. 1000^(1/3) floors to 10 and (1 - 0.925) * 200 reads as 15.
double snap_integer(double v) {
  const double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(r))) return r;
  return v;
}

}  // namespace

std::int64_t floor_power(std::int64_t n, double eta) {
  if (n < 1) detail::fail(ErrorKind::InvalidSize, "n must be >= 1");
  const double v = std::pow(static_cast<double>(n), eta);
  const double r = std::round(v);
  // Half-ulp guard: pow may land one ulp under an exact integer power.
  const double guarded = std::abs(v - r) <= 4.0 * std::numeric_limits<double>::epsilon() * r ? r : v;
  return static_cast<std::int64_t>(std::floor(guarded));
}

int default_k(std::int64_t n) {
  if (n < 1) detail::fail(ErrorKind::InvalidSize, "n must be >= 1");
  return static_cast<int>(std::floor(snap_integer(7.5 * std::cbrt(static_cast<double>(n)))));
}

double eta_for_xi(std::int64_t n, double xi) {
  if (n < 2) detail::fail(ErrorKind::InvalidSize, "n must be >= 2 to place a ladder");
  if (!(xi > 0.0)) detail::fail(ErrorKind::InvalidArgument, "xi must be > 0");
  const double nd = static_cast<double>(n);
  const double target = std::max(1.0, std::round(xi * (nd + 1.0) / nd - 1.0));
  // floor(n^eta) == target for eta in [log(target), log(target + 1)) / log(n).
  return std::log(target + 0.5) / std::log(nd);
}

QuantileLadder make_ladder(std::int64_t n, double eta, int k) {
  if (n < 1) detail::fail(ErrorKind::InvalidSize, "n must be >= 1");
  if (!(eta > 0.0 && eta < 1.0)) {
    std::ostringstream os;
    os << "eta must lie in (0, 1), got " << eta;
    detail::fail(ErrorKind::InvalidArgument, os.str());
  }
  if (k < 2) detail::fail(ErrorKind::InvalidSize, "ladder needs k >= 2 levels");

  QuantileLadder ladder;
  ladder.n = n;
  ladder.eta = eta;
  ladder.k = k;
  ladder.base = floor_power(n, eta);
  if (ladder.base + k >= n + 1) {
    std::ostringstream os;
    os << "ladder overflow: floor(n^eta) + k = " << ladder.base + k << " >= n + 1 = " << n + 1;
    detail::fail(ErrorKind::LadderOverflow, os.str());
  }
  ladder.levels.reserve(static_cast<std::size_t>(k));
  const double denom = static_cast<double>(n + 1);
  for (int j = 1; j <= k; ++j)
    ladder.levels.push_back(static_cast<double>(n + 1 - ladder.tail_count(j)) / denom);
  return ladder;
}

const char* to_string(BaseLevel rule) noexcept { return rule == BaseLevel::Last ? "last" : "first"; }

int base_level_index(const QuantileLadder& ladder, double tau_e, BaseLevel rule) {
  if (ladder.levels.empty()) return -1;
  if (rule == BaseLevel::Last)
    return ladder.levels.back() < tau_e ? static_cast<int>(ladder.levels.size()) - 1 : -1;
  for (std::size_t j = 0; j < ladder.levels.size(); ++j)
    if (ladder.levels[j] < tau_e) return static_cast<int>(j);
  return -1;
}

double hill_from_quantiles(std::span<const double> quantiles, double x) {
  const std::size_t k = quantiles.size();
  if (k < 2) detail::fail(ErrorKind::InvalidSize, "Hill estimate needs at least two levels");
  for (std::size_t j = 0; j < k; ++j) {
    if (!(quantiles[j] > 0.0)) {
      std::ostringstream os;
      os << "ladder estimate q(tau_" << j + 1 << " | x = " << x << ") = " << quantiles[j]
         << " is not positive";
      throw NonpositiveQuantileError(os.str(), {x}, {});
    }
  }
  const double log_last = std::log(quantiles[k - 1]);
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < k; ++j) sum += std::log(quantiles[j]) - log_last;
  return sum / static_cast<double>(k - 1);
}

std::vector<std::vector<double>> ladder_values(std::span<const QuantileFitModel> fits,
                                               std::span<const double> xs) {
  std::vector<std::vector<double>> out(xs.size(), std::vector<double>(fits.size()));
  for (std::size_t j = 0; j < fits.size(); ++j) {
    const auto column = predict(fits[j], xs);
    for (std::size_t i = 0; i < xs.size(); ++i) out[i][j] = column[i];
  }
  return out;
}

double hill_pointwise(std::span<const QuantileFitModel> fits, double x) {
  if (fits.size() < 2) detail::fail(ErrorKind::InvalidSize, "Hill estimate needs at least two fits");
  std::vector<double> q(fits.size());
  for (std::size_t j = 0; j < fits.size(); ++j) {
    q[j] = fits[j](x);
    if (!(q[j] > 0.0)) {
      std::ostringstream os;
      os << "ladder estimate at x = " << x << ", tau = " << fits[j].tau << " is " << q[j];
      throw NonpositiveQuantileError(os.str(), {x}, {fits[j].tau});
    }
  }
  return hill_from_quantiles(q, x);
}

double hill_pooled(std::span<const QuantileFitModel> fits, std::span<const double> xs) {
  if (xs.empty()) detail::fail(ErrorKind::InvalidSize, "pooling set is empty");
  if (fits.size() < 2) detail::fail(ErrorKind::InvalidSize, "Hill estimate needs at least two fits");
  const auto values = ladder_values(fits, xs);
  std::vector<double> bad_x, bad_tau;
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < fits.size(); ++j) {
      if (!(values[i][j] > 0.0)) {
        ok = false;
        bad_x.push_back(xs[i]);
        bad_tau.push_back(fits[j].tau);
        break;
      }
    }
    if (ok) sum += hill_from_quantiles(values[i], xs[i]);
  }
  if (!bad_x.empty()) {
    std::ostringstream os;
    os << bad_x.size() << " of " << xs.size()
       << " pooling points have a nonpositive ladder estimate (first at x = " << bad_x.front()
       << ", tau = " << bad_tau.front() << ")";
    throw NonpositiveQuantileError(os.str(), std::move(bad_x), std::move(bad_tau));
  }
  return sum / static_cast<double>(xs.size());
}

std::vector<double> EviEstimate::invalid_points() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!valid[i]) out.push_back(xs[i]);
  return out;
}

EviEstimate estimate_evi(std::span<const QuantileFitModel> fits, const QuantileLadder& ladder,
                         std::span<const double> xs) {
  if (fits.size() < 2) detail::fail(ErrorKind::InvalidSize, "Hill estimate needs at least two fits");
  if (xs.empty()) detail::fail(ErrorKind::InvalidSize, "evaluation set is empty");
  EviEstimate est;
  est.xs.assign(xs.begin(), xs.end());
  est.gamma.assign(xs.size(), std::numeric_limits<double>::quiet_NaN());
  est.valid.assign(xs.size(), 0);
  est.ladder = ladder;

  const auto values = ladder_values(fits, xs);
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    bool ok = true;
    for (double q : values[i]) ok = ok && q > 0.0;
    if (!ok) continue;
    est.gamma[i] = hill_from_quantiles(values[i], xs[i]);
    est.valid[i] = 1;
    sum += est.gamma[i];
    ++est.valid_count;
  }
  if (est.valid_count == 0) {
    throw NonpositiveQuantileError("no evaluation point has positive estimates at every ladder level",
                                   est.xs, {});
  }
  est.pooled = sum / static_cast<double>(est.valid_count);
  return est;
}

std::vector<double> pooled_sample_path(const std::vector<std::vector<double>>& values) {
  if (values.empty()) return {};
  const std::size_t k = values.front().size();
  std::vector<double> path;
  for (std::size_t used = 2; used <= k; ++used) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& row : values) {
      bool ok = true;
      for (std::size_t j = 0; j < used; ++j) ok = ok && row[j] > 0.0;
      if (!ok) continue;
      sum += hill_from_quantiles(std::span<const double>(row.data(), used));
      ++count;
    }
    path.push_back(count ? sum / static_cast<double>(count)
                         : std::numeric_limits<double>::quiet_NaN());
  }
  return path;
}

const char* to_string(Regime regime) noexcept {
  return regime == Regime::Extreme ? "extreme" : "intermediate";
}

RegimeVerdict classify_regime(double tau, std::int64_t n, double threshold) {
  detail::require_level(tau);
  if (n < 1) detail::fail(ErrorKind::InvalidSize, "n must be >= 1");
  RegimeVerdict v;
  v.xi = snap_integer((1.0 - tau) * static_cast<double>(n));
  v.threshold = threshold;
  v.regime = v.xi < threshold ? Regime::Extreme : Regime::Intermediate;
  return v;
}

}  // namespace xqr
