#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "xqr/error.hpp"
#include "xqr/rng.hpp"
#include "xqr/simlab.hpp"
#include "xqr/student_t.hpp"

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

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

// Small, fast study: one sample size, short ladder, coarse grids.
StudyConfig small_config() {
  StudyConfig c;
  c.sample_sizes = {200};
  c.levels = {0.9, 0.995};
  c.replications = 3;
  c.knots = 15;
  c.k = 10;
  c.grid_points = 101;
  c.lambda_grid_size = 5;
  return c;
}

bool same_values(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    for (std::size_t j = 0; j < a[i].size(); ++j)
      if (!(a[i][j] == b[i][j] || (std::isnan(a[i][j]) && std::isnan(b[i][j])))) return false;
  }
  return true;
}

std::string report_text(const StudyReport& r) {
  std::ostringstream os;
  write_report_csv(r, os);
  write_replications_csv(r, os);
  return os.str();
}

}  // namespace

TEST_SUITE("simlab") {

TEST_CASE("scenario functions") {
  CHECK(scenario_f(0.0) == 0.0);
  CHECK(scenario_f(1.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(scenario_sigma(0.0) == doctest::Approx(0.1));
  CHECK(scenario_sigma(1.0) == doctest::Approx(0.2));
  CHECK(scenario_dof(0.5) == 2);
  CHECK(SimScenario{ScenarioTag::A}.dof(0.5) == 5);
  CHECK(SimScenario{ScenarioTag::A}.evi(0.3) == doctest::Approx(0.2));
  // Near the edges nu(x) ~ 1 / (1.1 * 0.1), so s(x) = 10.
  CHECK(scenario_dof(0.0) == 10);
  CHECK(kind_of([] { scenario_f(1.5); }) == ErrorKind::OutOfDomain);
  CHECK(kind_of([] { scenario_dof(-0.1); }) == ErrorKind::OutOfDomain);
}

TEST_CASE("t quantiles") {
  CHECK(student_t_quantile(0.9, 5.0) == doctest::Approx(1.475884).epsilon(1e-6));
  CHECK(student_t_quantile(0.995, 5.0) == doctest::Approx(4.032143).epsilon(1e-6));
  CHECK(student_t_quantile(0.975, 30.0) == doctest::Approx(2.042272).epsilon(1e-6));
  CHECK(student_t_quantile(0.5, 3.0) == doctest::Approx(0.0).scale(1.0));
  for (double dof : {1.0, 2.0, 5.0, 30.0})
    for (double p : {0.01, 0.3, 0.9, 0.999})
      CHECK(student_t_cdf(student_t_quantile(p, dof), dof) == doctest::Approx(p).epsilon(1e-10));
  // Cauchy and t_2 have closed forms.
  CHECK(student_t_quantile(0.75, 1.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(student_t_quantile(0.9, 2.0) == doctest::Approx(0.8 / std::sqrt(2.0 * 0.9 * 0.1)).epsilon(1e-10));
}

TEST_CASE("true quantiles") {
  CHECK(true_quantile(ScenarioTag::A, 0.9, 0.0) == doctest::Approx(0.14759).epsilon(1e-4));
  for (double x : {0.1, 0.5, 0.8}) CHECK(true_quantile(ScenarioTag::A, 0.5, x) == doctest::Approx(scenario_f(x)));
  const double x = 0.5;
  CHECK(true_quantile(ScenarioTag::B, 0.99, x) ==
        doctest::Approx(scenario_f(x) + scenario_sigma(x) * student_t_quantile(0.99, 2.0)));
}

TEST_CASE("reference seed mixing") {
  // First output of the reference splitmix64 generator seeded with 0.
  CHECK(mix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(replication_seed(7, 0) == (7ULL ^ 0xE220A8397B1DCDAFULL));
}

TEST_CASE("uniform draws stay inside (0, 1)") {
  Rng rng(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 100000.0 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("t variates pass a Kolmogorov-Smirnov test") {
  const int n = 100000;
  const double critical = 1.628 / std::sqrt(static_cast<double>(n));  // 1% level
  for (int dof : {2, 5, 30}) {
    Rng rng(99 + dof);
    std::vector<double> draws(n);
    for (double& d : draws) d = rng.student_t(dof);
    std::sort(draws.begin(), draws.end());
    double stat = 0.0;
    for (int i = 0; i < n; ++i) {
      const double f = student_t_cdf(draws[i], dof);
      stat = std::max({stat, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    CHECK(stat < critical);
  }
}

TEST_CASE("generated data") {
  const auto a = generate(ScenarioTag::A, 500, 17);
  const auto b = generate(ScenarioTag::A, 500, 17);
  const auto c = generate(ScenarioTag::A, 500, 18);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.x != c.x);
  for (double x : a.x) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
  CHECK(kind_of([] { generate(ScenarioTag::A, 0, 1); }) == ErrorKind::InvalidSize);
}

TEST_CASE("noise level of scenario A") {
  const auto d = generate(ScenarioTag::A, 100000, 2024);
  std::vector<double> eps(d.x.size());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (d.y[i] - scenario_f(d.x[i])) / scenario_sigma(d.x[i]);
  const std::size_t idx = static_cast<std::size_t>(0.9 * static_cast<double>(eps.size()));
  std::nth_element(eps.begin(), eps.begin() + static_cast<std::ptrdiff_t>(idx), eps.end());
  CHECK(std::abs(eps[idx] - 1.4759) < 0.05);
}

TEST_CASE("integrated squared error") {
  const auto grid = uniform_grid(0.0, 1.0, 1001);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);
  CHECK(mise([](double x) { return x; }, [](double x) { return x; }, grid) == 0.0);
  CHECK(mise([](double) { return 3.0; }, [](double) { return 1.0; }, grid) == doctest::Approx(4.0));
  CHECK(mise([](double x) { return x; }, [](double) { return 0.0; }, grid) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  const std::vector<double> one{0.5};
  CHECK(mise(one, one, std::vector<double>{2.0}) == 0.0);
  CHECK(kind_of([&] { mise(grid, one, one); }) == ErrorKind::InvalidSize);
  CHECK(uniform_grid(2.0, 3.0, 1) == std::vector<double>{2.0});
}

TEST_CASE("parsing names") {
  CHECK(parse_scenario("a") == ScenarioTag::A);
  CHECK(parse_scenario("B") == ScenarioTag::B);
  CHECK(message_of([] { parse_scenario("C"); }).find("scenario") != std::string::npos);
  CHECK(parse_estimator("PSE-Ep") == Estimator::PseEp);
  CHECK(parse_estimator("pse-i") == Estimator::PseI);
  CHECK(kind_of([] { parse_estimator("PSE-X"); }) == ErrorKind::Config);
}

TEST_CASE("study config validation names the field") {
  auto c = small_config();
  c.replications = 0;
  CHECK(message_of([&] { c.validate(); }).find("replications") != std::string::npos);
  c = small_config();
  c.levels = {0.9, 1.0};
  CHECK(message_of([&] { c.validate(); }).find("tau") != std::string::npos);
  c = small_config();
  c.penalty_order = 4;
  CHECK(message_of([&] { c.validate(); }).find("penalty-order") != std::string::npos);
  c = small_config();
  c.k = 1;
  CHECK(kind_of([&] { c.validate(); }) == ErrorKind::Config);
}

TEST_CASE("study structure and determinism") {
  const auto cfg = small_config();
  const auto report = run_study(cfg);
  REQUIRE(report.rows.size() == 1 * 1 * 2 * 3);
  REQUIRE(report.replications.size() == 3);
  for (const auto& row : report.rows) {
    CHECK(row.replications == 3);
    CHECK(row.failures <= 3);
    if (row.failures < 3) CHECK(row.mise >= 0.0);
  }
  const auto* i995 = report.find(ScenarioTag::A, 200, 0.995, Estimator::PseI);
  REQUIRE(i995 != nullptr);
  CHECK(i995->failures == 0);
  CHECK(std::isfinite(i995->mc_stderr));
  CHECK(report.find(ScenarioTag::B, 200, 0.9, Estimator::PseI) == nullptr);

  SUBCASE("replications are reproducible on their own") {
    const auto one = run_replication(cfg, ScenarioTag::A, 200, 1);
    const auto& same = report.replications[1];
    CHECK(one.seed == same.seed);
    CHECK(one.seed == replication_seed(cfg.root_seed, 1));
    CHECK(same_values(one.ise, same.ise));
    CHECK(one.ladder_lambda == same.ladder_lambda);
  }

  SUBCASE("same seed gives identical output") {
    CHECK(report_text(run_study(cfg)) == report_text(report));
  }

  SUBCASE("threads give identical output") {
    auto threaded = cfg;
    threaded.threads = 3;
    CHECK(report_text(run_study(threaded)) == report_text(report));
  }

  SUBCASE("other seeds differ") {
    auto other = cfg;
    other.root_seed += 1;
    CHECK(report_text(run_study(other)) != report_text(report));
  }
}

TEST_CASE("single-replication study") {
  auto cfg = small_config();
  cfg.replications = 1;
  cfg.levels = {0.995};
  cfg.estimators = {Estimator::PseEp};
  const auto report = run_study(cfg);
  REQUIRE(report.rows.size() == 1);
  const auto rep = run_replication(cfg, ScenarioTag::A, 200, 0);
  if (std::isfinite(rep.ise[0][0])) CHECK(report.rows[0].mise == rep.ise[0][0]);
  CHECK(std::isnan(report.rows[0].mc_stderr));
}

TEST_CASE("report formats") {
  auto cfg = small_config();
  cfg.replications = 1;
  cfg.levels = {0.9};
  cfg.estimators = {Estimator::PseI};
  std::ostringstream os;
  write_report_csv(run_study(cfg), os);
  std::istringstream is(os.str());
  std::string header, line;
  std::getline(is, header);
  CHECK(header == "scenario,n,tau,estimator,replications,mise,mc_stderr,failures");
  std::getline(is, line);
  CHECK(line.rfind("A,200,0.9,PSE-I,1,", 0) == 0);
  CHECK(line.find(",nan,0") != std::string::npos);
}

}  // TEST_SUITE
