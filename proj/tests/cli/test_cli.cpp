#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xqr/cli.hpp"
#include "xqr/io.hpp"
#include "xqr/model.hpp"
#include "xqr/simlab.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "xqr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = xqr::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("xqr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// Heavy-tailed noise around a smooth trend, fixed generator.
void write_sample(const fs::path& p, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::student_t_distribution<double> t5(5.0);
  std::ofstream out(p);
  out.precision(17);
  out << "x,y\n";
  for (int i = 0; i < n; ++i) {
    const double x = unif(rng);
    out << x << ',' << std::sin(2.0 * x) + 0.1 * t5(rng) << '\n';
  }
}

const char* kToy = "x,y\n0.0,1\n0.25,5\n0.5,3\n0.75,2\n1.0,4\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("toy fit with a constant basis lands on the median") {
  const auto dir = scratch("toy");
  write_text(dir / "toy.csv", kToy);
  const auto r = run({"fit", "--input", (dir / "toy.csv").string(), "--tau", "0.5", "--degree", "0", "--knots", "1",
                      "--lambda", "0", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto curve = lines_of(slurp(dir / "curve.csv"));
  REQUIRE(curve.size() == 402);
  CHECK(curve[0] == "x,q");
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double q = std::stod(curve[i].substr(curve[i].find(',') + 1));
    CHECK(std::abs(q - 3.0) < 1e-3);
  }
}

TEST_CASE("re-running fit gives byte-identical files") {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  write_sample(a / "d.csv", 300, 7);
  fs::copy_file(a / "d.csv", b / "d.csv");
  for (const auto& dir : {a, b}) {
    const auto r = run({"fit", "--input", (dir / "d.csv").string(), "--tau", "0.9", "--knots", "15",
                        "--out-dir", dir.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  CHECK(slurp(a / "model.json") == slurp(b / "model.json"));
  CHECK(slurp(a / "curve.csv") == slurp(b / "curve.csv"));
}

TEST_CASE("model file reproduces predictions") {
  const auto dir = scratch("roundtrip");
  write_sample(dir / "d.csv", 250, 11);
  const auto r = run({"fit", "--input", (dir / "d.csv").string(), "--tau", "0.75", "--knots", "12", "--lambda",
                      "0.5", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto model = xqr::load_model((dir / "model.json").string());
  const auto curve = lines_of(slurp(dir / "curve.csv"));
  const auto xs = xqr::uniform_grid(model.basis.lower, model.basis.upper, 401);
  REQUIRE(curve.size() == xs.size() + 1);
  std::vector<double> qs;
  for (std::size_t i = 1; i < curve.size(); ++i) qs.push_back(std::stod(curve[i].substr(curve[i].find(',') + 1)));
  // curve.csv carries 12 significant digits.
  const auto reloaded = xqr::predict(model, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(reloaded[i] - qs[i]) < 1e-9 * (1.0 + std::abs(qs[i])));

  const auto again = xqr::model_from_json(xqr::model_to_json(model));
  const auto twice = xqr::predict(again, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(twice[i] - reloaded[i]) <= 1e-12);
}

TEST_CASE("missing values are dropped and counted") {
  const auto dir = scratch("missing");
  write_text(dir / "m.csv", "x,y\n0,1\n0.2,NA\n0.4,2\n,5\n0.6,3\n0.8,nan\n1,4\n");
  const auto r = run({"fit", "--input", (dir / "m.csv").string(), "--degree", "0", "--knots", "1", "--lambda", "0",
                      "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("rows: 7 read, 3 dropped") != std::string::npos);
}

TEST_CASE("data errors exit with 3") {
  const auto dir = scratch("data_errors");
  write_text(dir / "flat.csv", "x,y\n2,1\n2,3\n2,5\n");
  auto r = run({"fit", "--input", (dir / "flat.csv").string(), "--out-dir", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("x-range is empty") != std::string::npos);

  write_text(dir / "bad.csv", "x,y\n0,1\n0.5,2\n0.7,abc\n1,3\n");
  r = run({"fit", "--input", (dir / "bad.csv").string(), "--out-dir", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("bad.csv:4:") != std::string::npos);

  write_text(dir / "short.csv", "x,y\n0,1\n0.5\n");
  r = run({"fit", "--input", (dir / "short.csv").string(), "--out-dir", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("short.csv:3:") != std::string::npos);

  r = run({"fit", "--input", (dir / "absent.csv").string(), "--out-dir", dir.string()});
  CHECK(r.code == 3);

  r = run({"fit", "--input", (dir / "flat.csv").string(), "--y-col", "z", "--out-dir", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("'z'") != std::string::npos);

  write_text(dir / "empty_rows.csv", "x,y\nNA,1\n");
  r = run({"fit", "--input", (dir / "empty_rows.csv").string(), "--out-dir", dir.string()});
  CHECK(r.code == 3);
}

TEST_CASE("configuration errors exit with 2") {
  const auto dir = scratch("config_errors");
  write_text(dir / "toy.csv", kToy);
  const auto input = (dir / "toy.csv").string();
  CHECK(run({"fit"}).code == 2);
  CHECK(run({"fit", "--input", input, "--tau", "1.5"}).code == 2);
  CHECK(run({"fit", "--input", input, "--lambda", "-1"}).code == 2);
  CHECK(run({"fit", "--input", input, "--lambda", "often"}).code == 2);
  CHECK(run({"fit", "--input", input, "--knots", "0"}).code == 2);
  CHECK(run({"tail", "--input", input, "--tau-e", "0.99", "--k", "one"}).code == 2);
  CHECK(run({"tail", "--input", input, "--tau-e", "0.99", "--eta", "0.3", "--xi", "3"}).code == 2);
  CHECK(run({"classify", "--tau", "0.9"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("numerical failures exit with 4") {
  const auto dir = scratch("numeric");
  std::ostringstream csv;
  csv << "x,y\n";
  for (int i = 0; i <= 10; ++i) csv << 0.01 * i << ',' << i % 3 << '\n';
  for (int i = 0; i <= 10; ++i) csv << 0.9 + 0.01 * i << ',' << i % 4 << '\n';
  write_text(dir / "gap.csv", csv.str());
  const auto r = run({"fit", "--input", (dir / "gap.csv").string(), "--knots", "10", "--lambda", "0", "--out-dir",
                      dir.string()});
  CHECK(r.code == 4);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("tail writes its artifacts") {
  const auto dir = scratch("tail");
  write_sample(dir / "d.csv", 300, 3);
  const auto r = run({"tail", "--input", (dir / "d.csv").string(), "--tau-e", "0.999", "--k", "12", "--knots", "10",
                      "--lambda", "1", "--grid-points", "51", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const auto path = lines_of(slurp(dir / "evi_path.csv"));
  CHECK(path.front() == "k,gamma_pooled");
  CHECK(path.size() == 1 + 11);
  CHECK(path[1].rfind("2,", 0) == 0);
  CHECK(path.back().rfind("12,", 0) == 0);

  const auto pw = lines_of(slurp(dir / "evi_pointwise.csv"));
  CHECK(pw.front() == "x,gamma,valid");
  CHECK(pw.size() == 52);
  const auto ext = lines_of(slurp(dir / "extreme_curve.csv"));
  CHECK(ext.front() == "x,q_base,q_pointwise,q_pooled");
  CHECK(ext.size() == 52);

  const auto summary = nlohmann::json::parse(slurp(dir / "tail_summary.json"));
  CHECK(summary["n"] == 300);
  CHECK(summary["ladder"]["k"] == 12);
  CHECK(summary["lambda_policy"] == "fixed");
  CHECK(summary["regime"]["regime"] == "extreme");
  CHECK(summary["regime"]["xi"].get<double>() == doctest::Approx(0.3));
  CHECK(std::isfinite(summary["gamma_pooled"].get<double>()));
}

TEST_CASE("classify verdicts") {
  auto r = run({"classify", "--tau", "0.985", "--n", "1000"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(lines_of(r.out).at(1));
  CHECK(j["xi"].get<double>() == doctest::Approx(15.0));
  CHECK(j["regime"] == "extreme");

  r = run({"classify", "--tau", "0.9", "--n", "10000"});
  j = nlohmann::json::parse(lines_of(r.out).at(1));
  CHECK(j["xi"].get<double>() == doctest::Approx(1000.0));
  CHECK(j["regime"] == "intermediate");

  r = run({"classify", "--tau", "0.925", "--n", "200"});
  CHECK(nlohmann::json::parse(lines_of(r.out).at(1))["regime"] == "extreme");
  r = run({"classify", "--tau", "0.925", "--n", "200", "--threshold", "15"});
  CHECK(nlohmann::json::parse(lines_of(r.out).at(1))["regime"] == "intermediate");

  r = run({"classify", "--tau", "0.999", "--n", "8000"});
  j = nlohmann::json::parse(lines_of(r.out).at(1));
  CHECK(j["xi"].get<double>() == doctest::Approx(8.0));
  CHECK(j["regime"] == "extreme");
  CHECK(lines_of(r.out).at(0).find("extreme") != std::string::npos);

  CHECK(run({"classify", "--tau", "1.2", "--n", "100"}).code == 2);
}

TEST_CASE("simulate writes a one-row report") {
  const auto dir = scratch("simulate");
  const auto r = run({"simulate", "--scenario", "A", "--n-list", "200", "--tau-list", "0.9", "--replications", "1",
                      "--estimators", "PSE-I", "--knots", "10", "--grid-points", "101", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto report = lines_of(slurp(dir / "report.csv"));
  CHECK(report.front() == "scenario,n,tau,estimator,replications,mise,mc_stderr,failures");
  REQUIRE(report.size() == 2);
  CHECK(report[1].rfind("A,200,0.9,PSE-I,1,", 0) == 0);

  const auto all = run({"simulate", "--n-list", "200", "--tau-list", "0.9", "--replications", "1", "--knots", "10",
                        "--grid-points", "101", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(all.code == 0, all.err);
  CHECK(lines_of(slurp(dir / "report.csv")).size() == 1 + 3);

  const auto bad = run({"simulate", "--scenario", "C", "--out-dir", dir.string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("scenario") != std::string::npos);
  const auto bad_n = run({"simulate", "--n-list", "200,-5", "--out-dir", dir.string()});
  CHECK(bad_n.code == 2);
  const auto bad_e = run({"simulate", "--estimators", "PSE-X", "--out-dir", dir.string()});
  CHECK(bad_e.code == 2);
}

}  // TEST_SUITE

TEST_SUITE("cli_long") {

TEST_CASE("pooled index on exact Pareto data") {
  const auto dir = scratch("pareto");
  std::mt19937_64 rng(20240229);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  {
    std::ofstream out(dir / "p.csv");
    out.precision(17);
    out << "x,y\n";
    for (int i = 0; i < 10000; ++i) {
      const double x = unif(rng);
      out << x << ',' << std::pow(1.0 - unif(rng), -0.2) << '\n';
    }
  }
  const auto r = run({"tail", "--input", (dir / "p.csv").string(), "--tau-e", "0.999", "--knots", "10", "--lambda",
                      "1", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto summary = nlohmann::json::parse(slurp(dir / "tail_summary.json"));
  const double gamma = summary["gamma_pooled"].get<double>();
  MESSAGE("pooled gamma = " << gamma);
  CHECK(std::abs(gamma - 0.2) < 0.05);
  CHECK(summary["ladder"]["k"] == 161);
  CHECK(lines_of(slurp(dir / "evi_path.csv")).size() == 161);
}

}  // TEST_SUITE
