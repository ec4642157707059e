#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "xqr/error.hpp"
#include "xqr/extrapolate.hpp"

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

QuantileFitModel constant_fit(double tau, double value) {
  QuantileFitModel m;
  m.basis = make_basis(0.0, 1.0, 1, 0);
  m.tau = tau;
  m.coefficients = Eigen::VectorXd::Constant(1, value);
  return m;
}

double one_value(double tau_i, double tau_e, double gamma, double base) {
  const std::vector<double> xs{0.5}, b{base}, g{gamma};
  return extrapolate_values(xs, b, tau_i, g, tau_e, EviSource::Pointwise).values[0];
}

}  // namespace

TEST_SUITE("extrapolate") {

TEST_CASE("worked values") {
  CHECK(one_value(0.9, 0.99, 0.5, 2.0) == doctest::Approx(6.324555).epsilon(1e-7));
  CHECK(std::abs(one_value(0.99, 0.999, 0.22, 100.0) - 165.959) < 5e-4);
  CHECK(weissman_factor(0.9, 0.9, 0.7) == 1.0);
  CHECK(weissman_factor(0.9, 0.99, 0.0) == 1.0);
}

TEST_CASE("log-linear in gamma and in the level ratio") {
  for (double gamma : {0.05, 0.2, 0.5, 1.3}) {
    const double tau_i = 0.95, tau_e = 0.999;
    const double lhs = std::log(weissman_factor(tau_i, tau_e, gamma));
    CHECK(std::abs(lhs - gamma * std::log((1.0 - tau_i) / (1.0 - tau_e))) < 1e-12);
    CHECK(std::abs(std::log(weissman_factor(tau_i, tau_e, 2.0 * gamma)) - 2.0 * lhs) < 1e-12);
  }
}

TEST_CASE("extrapolation composes") {
  const double gamma = 0.31, q = 4.5;
  const double direct = one_value(0.9, 0.999, gamma, q);
  const double two_step = one_value(0.99, 0.999, gamma, one_value(0.9, 0.99, gamma, q));
  CHECK(std::abs(direct - two_step) < 1e-12 * direct);
}

TEST_CASE("exact recovery of Pareto quantiles") {
  for (double gamma : {0.1, 0.2, 0.5}) {
    const double tau_i = 0.97, tau_e = 0.9995;
    const double truth = std::pow(1.0 - tau_e, -gamma);
    CHECK(std::abs(one_value(tau_i, tau_e, gamma, std::pow(1.0 - tau_i, -gamma)) - truth) < 1e-12 * truth);
  }
}

TEST_CASE("factor is at least one for nonnegative gamma") {
  for (double gamma : {0.0, 0.01, 0.2, 2.0})
    for (double tau_e : {0.91, 0.99, 0.99999}) CHECK(weissman_factor(0.9, tau_e, gamma) >= 1.0);
}

TEST_CASE("level order and argument errors") {
  const std::vector<double> xs{0.5}, b{1.0}, g{0.2};
  CHECK(kind_of([&] { extrapolate_values(xs, b, 0.99, g, 0.9, EviSource::Pooled); }) == ErrorKind::LevelOrder);
  CHECK(kind_of([&] { extrapolate_values(xs, b, 0.99, g, 0.99, EviSource::Pooled); }) == ErrorKind::LevelOrder);
  CHECK(kind_of([&] { extrapolate_values(xs, b, 0.9, g, 1.0, EviSource::Pooled); }) == ErrorKind::InvalidLevel);
  const std::vector<double> nan_gamma{std::nan("")};
  CHECK(kind_of([&] { extrapolate_values(xs, b, 0.9, nan_gamma, 0.99, EviSource::Pooled); }) ==
        ErrorKind::InvalidArgument);
  const std::vector<double> two{1.0, 2.0};
  CHECK(kind_of([&] { extrapolate_values(xs, two, 0.9, g, 0.99, EviSource::Pooled); }) == ErrorKind::InvalidSize);
}

TEST_CASE("nonpositive bases are refused and negative gamma passes through") {
  const std::vector<double> xs{0.1, 0.2, 0.3};
  const std::vector<double> base{2.0, 0.0, -1.0};
  const std::vector<double> gamma{-0.1, 0.2, 0.2};
  const auto est = extrapolate_values(xs, base, 0.9, gamma, 0.99, EviSource::Pointwise);
  CHECK(est.refused_count == 2);
  CHECK(est.refused == std::vector<char>{0, 1, 1});
  CHECK(std::isnan(est.values[1]));
  CHECK(est.negative_gamma_count == 1);
  CHECK(est.factors[0] < 1.0);
  CHECK(est.values[0] == doctest::Approx(2.0 * std::pow(10.0, -0.1)));
}

TEST_CASE("curve front ends") {
  const auto base = constant_fit(0.9, 2.0);
  const std::vector<double> xs{0.0, 0.5, 1.0};
  const auto pooled = extrapolate_pooled(base, 0.5, 0.99, xs);
  CHECK(pooled.source == EviSource::Pooled);
  CHECK(pooled.base_level == 0.9);
  for (double v : pooled.values) CHECK(v == doctest::Approx(6.324555).epsilon(1e-7));

  const std::vector<double> gamma{0.0, 0.5, 1.0};
  const auto pw = extrapolate_pointwise(base, gamma, 0.99, xs);
  CHECK(pw.values[0] == doctest::Approx(2.0));
  CHECK(pw.values[1] == doctest::Approx(6.324555).epsilon(1e-7));
  CHECK(pw.values[2] == doctest::Approx(20.0));
  CHECK(kind_of([&] { extrapolate_pooled(base, 0.2, 0.8, xs); }) == ErrorKind::LevelOrder);
}

}  // TEST_SUITE
