#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "xqr/error.hpp"
#include "xqr/evt.hpp"

using namespace xqr;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an xqr::Error");
  return ErrorKind::Io;
}

// Constant curve q(tau | x) = value on [0, 1].
QuantileFitModel constant_fit(double tau, double value) {
  QuantileFitModel m;
  m.basis = make_basis(0.0, 1.0, 1, 0);
  m.tau = tau;
  m.coefficients = Eigen::VectorXd::Constant(1, value);
  return m;
}

// Straight line a + b x on [0, 1] via linear hats.
QuantileFitModel linear_fit(double tau, double a, double b) {
  QuantileFitModel m;
  m.basis = make_basis(0.0, 1.0, 1, 1);
  m.tau = tau;
  m.coefficients = Eigen::Vector2d(a, a + b);
  return m;
}

std::vector<double> pareto_values(const QuantileLadder& ladder, double gamma) {
  std::vector<double> q;
  for (double tau : ladder.levels) q.push_back(std::pow(1.0 - tau, -gamma));
  return q;
}

double closed_form(double gamma, std::int64_t base, int k) {
  double s = 0.0;
  for (int j = 1; j < k; ++j) s += std::log(static_cast<double>(base + k) / static_cast<double>(base + j));
  return gamma / (k - 1) * s;
}

}  // namespace

TEST_SUITE("evt") {

TEST_CASE("default ladder length") {
  CHECK(default_k(1000) == 75);
  CHECK(default_k(200) == 43);
  CHECK(default_k(8) == 15);
  CHECK(kind_of([] { default_k(0); }) == ErrorKind::InvalidSize);
}

TEST_CASE("floor of n^eta") {
  CHECK(floor_power(1000, 0.1) == 1);
  CHECK(floor_power(1000, 1.0 / 3.0) == 10);
  CHECK(floor_power(100, 0.5) == 10);
  CHECK(floor_power(1024, 0.3) == 8);
}

TEST_CASE("ladder levels are exact") {
  const auto ladder = make_ladder(1000, 0.1, 75);
  REQUIRE(ladder.levels.size() == 75);
  CHECK(ladder.base == 1);
  for (int j = 1; j <= 75; ++j) {
    const double count = (1.0 - ladder.levels[j - 1]) * 1001.0;
    CHECK(std::abs(count - static_cast<double>(1 + j)) < 1e-9);
    CHECK(ladder.tail_count(j) == 1 + j);
  }
  for (std::size_t j = 0; j + 1 < ladder.levels.size(); ++j) CHECK(ladder.levels[j] > ladder.levels[j + 1]);
}

TEST_CASE("ladder placement from xi") {
  for (std::int64_t n : {200, 500, 1000, 5000}) {
    const auto ladder = make_ladder(n, eta_for_xi(n, 3.0), 10);
    const double xi1 = (1.0 - ladder.levels.front()) * static_cast<double>(n);
    CHECK(std::abs(xi1 - 3.0) < 0.05);
  }
  const auto l1000 = make_ladder(1000, eta_for_xi(1000, 3.0), 75);
  CHECK(l1000.base == 2);
  CHECK(l1000.levels.front() == doctest::Approx(1.0 - 3.0 / 1001.0));
  CHECK(kind_of([] { eta_for_xi(1000, 0.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("ladder errors") {
  CHECK(kind_of([] { make_ladder(10, 0.5, 8); }) == ErrorKind::LadderOverflow);
  CHECK(kind_of([] { make_ladder(1000, 0.0, 5); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { make_ladder(1000, 1.0, 5); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { make_ladder(1000, 0.1, 1); }) == ErrorKind::InvalidSize);
  CHECK_NOTHROW(make_ladder(10, 0.5, 7));
}

TEST_CASE("extrapolation base level") {
  const auto ladder = make_ladder(1000, eta_for_xi(1000, 3.0), 75);
  // tau_1 = 1 - 3/1001 lies above 0.995; the first level below it is tau_4.
  CHECK(base_level_index(ladder, 0.995) == 3);
  CHECK(ladder.levels[3] == doctest::Approx(1.0 - 6.0 / 1001.0));
  CHECK(base_level_index(ladder, 0.999) == 0);
  CHECK(base_level_index(ladder, 0.995, BaseLevel::Last) == 74);
  CHECK(base_level_index(ladder, 0.9) == -1);
  CHECK(base_level_index(ladder, 0.9, BaseLevel::Last) == -1);
}

TEST_CASE("Hill estimate on exact Pareto quantiles") {
  const auto ladder = make_ladder(1000, 0.1, 10);
  const double g = hill_from_quantiles(pareto_values(ladder, 0.2));
  CHECK(g == doctest::Approx(0.14393).epsilon(1e-4));
  CHECK(std::abs(g - closed_form(0.2, 1, 10)) < 1e-12);

  for (double gamma : {0.1, 0.2, 0.5})
    for (int k : {5, 10, 50})
      for (std::int64_t n : {100, 1000}) {
        const auto l = make_ladder(n, 0.1, k);
        CHECK(std::abs(hill_from_quantiles(pareto_values(l, gamma)) - closed_form(gamma, l.base, k)) < 1e-12);
      }
}

TEST_CASE("Hill estimate is scale invariant and zero on flat ladders") {
  const auto ladder = make_ladder(500, 0.2, 12);
  auto q = pareto_values(ladder, 0.3);
  const double g = hill_from_quantiles(q);
  for (double& v : q) v *= 37.0;
  CHECK(std::abs(hill_from_quantiles(q) - g) < 1e-13);
  CHECK(hill_from_quantiles(std::vector<double>(8, 4.2)) == 0.0);
}

TEST_CASE("Hill estimate refuses nonpositive quantiles") {
  const std::vector<double> q{3.0, 2.0, -0.5, 1.0};
  try {
    hill_from_quantiles(q, 0.25);
    FAIL("expected an error");
  } catch (const NonpositiveQuantileError& e) {
    CHECK(e.kind() == ErrorKind::NonpositiveQuantile);
    REQUIRE(e.points().size() == 1);
    CHECK(e.points()[0] == 0.25);
  }
  CHECK(kind_of([] { hill_from_quantiles(std::vector<double>{1.0}); }) == ErrorKind::InvalidSize);
}

TEST_CASE("pointwise and pooled estimates from fitted curves") {
  const auto ladder = make_ladder(1000, 0.1, 10);
  const auto q = pareto_values(ladder, 0.2);
  std::vector<QuantileFitModel> fits;
  for (std::size_t j = 0; j < q.size(); ++j) fits.push_back(constant_fit(ladder.levels[j], q[j]));

  CHECK(hill_pointwise(fits, 0.4) == doctest::Approx(closed_form(0.2, 1, 10)).epsilon(1e-12));
  const std::vector<double> xs{0.0, 0.3, 0.9};
  CHECK(hill_pooled(fits, xs) == doctest::Approx(closed_form(0.2, 1, 10)).epsilon(1e-12));

  const auto est = estimate_evi(fits, ladder, xs);
  CHECK(est.valid_count == 3);
  CHECK(est.pooled == doctest::Approx(closed_form(0.2, 1, 10)).epsilon(1e-12));
  CHECK(est.invalid_points().empty());
}

TEST_CASE("pooled estimate is the mean of pointwise estimates") {
  // Linear curves with different tail indices at the two ends.
  const auto ladder = make_ladder(400, 0.2, 6);
  std::vector<QuantileFitModel> fits;
  for (double tau : ladder.levels) {
    const double left = std::pow(1.0 - tau, -0.1), right = 2.0 * std::pow(1.0 - tau, -0.4);
    fits.push_back(linear_fit(tau, left, right - left));
  }
  const std::vector<double> xs{0.0, 0.2, 0.5, 0.7, 1.0};
  double mean = 0.0;
  for (double x : xs) mean += hill_pointwise(fits, x);
  mean /= static_cast<double>(xs.size());
  CHECK(hill_pooled(fits, xs) == doctest::Approx(mean).epsilon(1e-12));
  CHECK(estimate_evi(fits, ladder, xs).pooled == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("strict and masked pooling with nonpositive estimates") {
  const auto ladder = make_ladder(400, 0.2, 4);
  std::vector<QuantileFitModel> fits;
  // Positive for x > 0.25 at every level, negative below.
  for (double tau : ladder.levels) {
    const double s = std::pow(1.0 - tau, -0.25);
    fits.push_back(linear_fit(tau, -s, 4.0 * s));
  }
  const std::vector<double> xs{0.1, 0.2, 0.5, 0.9};
  try {
    hill_pooled(fits, xs);
    FAIL("expected an error");
  } catch (const NonpositiveQuantileError& e) {
    CHECK(e.points() == std::vector<double>{0.1, 0.2});
    REQUIRE(e.levels().size() == 2);
    CHECK(e.levels()[0] == ladder.levels[0]);
  }
  try {
    hill_pointwise(fits, 0.1);
    FAIL("expected an error");
  } catch (const NonpositiveQuantileError& e) {
    CHECK(e.points() == std::vector<double>{0.1});
    CHECK(e.levels() == std::vector<double>{ladder.levels[0]});
  }

  const auto est = estimate_evi(fits, ladder, xs);
  CHECK(est.valid_count == 2);
  CHECK(est.invalid_points() == std::vector<double>{0.1, 0.2});
  CHECK(std::isnan(est.gamma[0]));
  CHECK(est.pooled == doctest::Approx(0.5 * (est.gamma[2] + est.gamma[3])));

  const std::vector<double> bad{0.05, 0.2};
  CHECK(kind_of([&] { estimate_evi(fits, ladder, bad); }) == ErrorKind::NonpositiveQuantile);
}

TEST_CASE("pooled sample path") {
  const auto ladder = make_ladder(1000, 0.1, 10);
  const auto q = pareto_values(ladder, 0.2);
  const std::vector<std::vector<double>> values{q, q};
  const auto path = pooled_sample_path(values);
  REQUIRE(path.size() == 9);
  for (int used = 2; used <= 10; ++used)
    CHECK(path[used - 2] == doctest::Approx(closed_form(0.2, 1, used)).epsilon(1e-12));
  CHECK(pooled_sample_path({}).empty());
}

TEST_CASE("regime rule of thumb") {
  auto v = classify_regime(0.925, 200);
  CHECK(v.xi == 15.0);
  CHECK(v.regime == Regime::Extreme);
  v = classify_regime(0.985, 1000);
  CHECK(v.xi == 15.0);
  CHECK(v.regime == Regime::Extreme);
  v = classify_regime(0.999, 1000);
  CHECK(v.xi == 1.0);
  CHECK(v.regime == Regime::Extreme);
  v = classify_regime(0.9, 1000);
  CHECK(v.xi == 100.0);
  CHECK(v.regime == Regime::Intermediate);
  CHECK(classify_regime(0.925, 200, 15.0).regime == Regime::Intermediate);
  CHECK(classify_regime(0.85, 200).xi == 30.0);
  CHECK(classify_regime(0.85, 200).regime == Regime::Intermediate);
  CHECK(kind_of([] { classify_regime(1.0, 100); }) == ErrorKind::InvalidLevel);
  CHECK(kind_of([] { classify_regime(0.5, 0); }) == ErrorKind::InvalidSize);
  CHECK(std::string(to_string(Regime::Extreme)) == "extreme");
}

}  // TEST_SUITE
