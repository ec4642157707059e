#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "xqr/bspline.hpp"
#include "xqr/checkloss.hpp"
#include "xqr/error.hpp"
#include "xqr/evt.hpp"
#include "xqr/extrapolate.hpp"
#include "xqr/fitter.hpp"
#include "xqr/io.hpp"
#include "xqr/model.hpp"
#include "xqr/simlab.hpp"

namespace py = pybind11;
using namespace xqr;

namespace {

using Vec = std::vector<double>;

py::array_t<double> as_array(const Vec& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<bool> as_mask(const std::vector<char>& v) {
  py::array_t<bool> out(static_cast<py::ssize_t>(v.size()));
  auto m = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<py::ssize_t>(i)) = v[i] != 0;
  return out;
}

BasisSpec basis_for(const Vec& x, std::optional<double> lower, std::optional<double> upper, int knots,
                    int degree) {
  if (x.empty()) detail::fail(ErrorKind::Data, "no observations");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return make_basis(lower.value_or(*lo), upper.value_or(*hi), knots, degree);
}

py::dict diagnostics_dict(const SolverDiagnostics& d) {
  py::dict out;
  out["iterations"] = d.iterations;
  out["polish_iterations"] = d.polish_iterations;
  out["inner_solves"] = d.inner_solves;
  out["converged"] = d.converged;
  out["final_alpha"] = d.final_alpha;
  out["final_eta"] = d.final_eta;
  out["initial_objective"] = d.initial_objective;
  out["objective"] = d.objective;
  out["last_step"] = d.last_step;
  return out;
}

py::dict extreme_dict(const ExtremeQuantileEstimate& e) {
  py::dict out;
  out["base_level"] = e.base_level;
  out["target_level"] = e.target_level;
  out["source"] = to_string(e.source);
  out["x"] = as_array(e.xs);
  out["base"] = as_array(e.base_values);
  out["gamma"] = as_array(e.gamma);
  out["factor"] = as_array(e.factors);
  out["q"] = as_array(e.values);
  out["refused"] = as_mask(e.refused);
  return out;
}

LambdaChoice lambda_choice(std::optional<double> lam) {
  LambdaChoice c;
  if (lam) {
    c.policy = LambdaPolicy::Fixed;
    c.value = *lam;
  }
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Penalized B-spline quantile regression with extreme-value extrapolation";

  static py::exception<Error> error(m, "XqrError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::handle(error.ptr())(e.what());
      inst.attr("kind") = to_string(e.kind());
      if (const auto* nq = dynamic_cast<const NonpositiveQuantileError*>(&e))
        inst.attr("points") = as_array(nq->points());
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  // bspline
  py::class_<BasisSpec>(m, "Basis")
      .def(py::init(&make_basis), py::arg("lower"), py::arg("upper"), py::arg("knots"), py::arg("degree") = 3)
      .def_readonly("degree", &BasisSpec::degree)
      .def_readonly("interior", &BasisSpec::interior)
      .def_readonly("lower", &BasisSpec::lower)
      .def_readonly("upper", &BasisSpec::upper)
      .def_readonly("knots", &BasisSpec::knots)
      .def_property_readonly("dimension", &BasisSpec::dimension)
      .def("eval", [](const BasisSpec& s, double x) { return eval_basis(s, x); }, py::arg("x"))
      .def("design", [](const BasisSpec& s, const Vec& xs) { return design_matrix(s, xs); }, py::arg("x"))
      .def("difference", &difference_operator, py::arg("order"))
      .def("gram", &gram_matrix)
      .def("penalty", [](const BasisSpec& s, int order) { return penalty_matrix(s, order).penalty; },
           py::arg("order") = 2)
      .def("__repr__", [](const BasisSpec& s) {
        std::ostringstream os;
        os << "Basis([" << s.lower << ", " << s.upper << "], knots=" << s.interior << ", degree=" << s.degree
           << ")";
        return os.str();
      });

  // checkloss
  m.def("pinball", &pinball, py::arg("tau"), py::arg("u"));
  m.def(
      "smoothed_pinball",
      [](double tau, double alpha, double u) {
        const auto r = smoothed_pinball(LossParams{tau, alpha}, u);
        return py::make_tuple(r.value, r.weight);
      },
      py::arg("tau"), py::arg("alpha"), py::arg("u"), "(value, IRLS weight)");

  // fitter
  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("alpha0", &SolverConfig::alpha0)
      .def_readwrite("alpha_decay", &SolverConfig::alpha_decay)
      .def_readwrite("alpha_floor", &SolverConfig::alpha_floor)
      .def_readwrite("eta0", &SolverConfig::eta0)
      .def_readwrite("eta_growth", &SolverConfig::eta_growth)
      .def_readwrite("max_iterations", &SolverConfig::max_iterations)
      .def_readwrite("coef_tol", &SolverConfig::coef_tol)
      .def_readwrite("objective_tol", &SolverConfig::objective_tol)
      .def_readwrite("max_inner", &SolverConfig::max_inner)
      .def_readwrite("polish_iterations", &SolverConfig::polish_iterations);

  py::class_<QuantileFitModel>(m, "Model")
      .def_readonly("basis", &QuantileFitModel::basis)
      .def_readonly("tau", &QuantileFitModel::tau)
      .def_readonly("lambda_", &QuantileFitModel::lambda)
      .def_readonly("penalty_order", &QuantileFitModel::penalty_order)
      .def_readonly("coefficients", &QuantileFitModel::coefficients)
      .def_property_readonly("diagnostics",
                             [](const QuantileFitModel& mo) { return diagnostics_dict(mo.diagnostics); })
      .def("predict", [](const QuantileFitModel& mo, const Vec& xs) { return as_array(predict(mo, xs)); },
           py::arg("x"))
      .def("to_json", &model_to_json)
      .def_static("from_json", &model_from_json, py::arg("text"))
      .def("save", [](const QuantileFitModel& mo, const std::string& path) { save_model(mo, path); },
           py::arg("path"))
      .def_static("load", &load_model, py::arg("path"))
      .def("__repr__", [](const QuantileFitModel& mo) {
        std::ostringstream os;
        os << "Model(tau=" << mo.tau << ", lambda=" << mo.lambda << ", dimension=" << mo.coefficients.size()
           << ")";
        return os.str();
      });

  m.def(
      "fit",
      [](const Vec& x, const Vec& y, double tau, std::optional<double> lam, int knots, int degree,
         int penalty_order, std::optional<double> lower, std::optional<double> upper,
         const SolverConfig& solver, int threads) {
        const auto spec = basis_for(x, lower, upper, knots, degree);
        const QuantileProblem problem(x, y, spec, degree == 0 ? 1 : penalty_order);
        if (lam) return problem.fit(tau, *lam, solver);
        py::gil_scoped_release release;
        return select_lambda_gacv(problem, tau, default_lambda_grid(y), solver, threads).selected_fit();
      },
      py::arg("x"), py::arg("y"), py::arg("tau") = 0.5, py::arg("lam") = py::none(), py::arg("knots") = 40,
      py::arg("degree") = 3, py::arg("penalty_order") = 2, py::arg("lower") = py::none(),
      py::arg("upper") = py::none(), py::arg("solver") = SolverConfig{}, py::arg("threads") = 1,
      "Quantile curve at level tau. lam=None selects the smoothing parameter by GACV.");

  m.def(
      "gacv",
      [](const Vec& x, const Vec& y, double tau, std::optional<Vec> grid, int knots, int degree,
         int penalty_order, const SolverConfig& solver, int threads) {
        const auto spec = basis_for(x, std::nullopt, std::nullopt, knots, degree);
        const QuantileProblem problem(x, y, spec, penalty_order);
        const Vec g = grid ? *grid : default_lambda_grid(y);
        GacvResult r;
        {
          py::gil_scoped_release release;
          r = select_lambda_gacv(problem, tau, g, solver, threads);
        }
        py::dict out;
        out["lambda"] = r.lambda;
        out["grid"] = as_array(r.grid);
        out["score"] = as_array(r.scores);
        out["df"] = as_array(r.df);
        out["failed"] = as_mask(r.failed);
        out["fit"] = r.selected_fit();
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("tau"), py::arg("grid") = py::none(), py::arg("knots") = 40,
      py::arg("degree") = 3, py::arg("penalty_order") = 2, py::arg("solver") = SolverConfig{},
      py::arg("threads") = 1);

  m.def("default_lambda_grid", [](const Vec& y, int count) { return as_array(default_lambda_grid(y, count)); },
        py::arg("y"), py::arg("count") = 30);

  // evt
  py::class_<QuantileLadder>(m, "Ladder")
      .def(py::init(&make_ladder), py::arg("n"), py::arg("eta"), py::arg("k"))
      .def_readonly("n", &QuantileLadder::n)
      .def_readonly("base", &QuantileLadder::base)
      .def_readonly("eta", &QuantileLadder::eta)
      .def_readonly("k", &QuantileLadder::k)
      .def_property_readonly("levels", [](const QuantileLadder& l) { return as_array(l.levels); });

  m.def("floor_power", &floor_power, py::arg("n"), py::arg("eta"));
  m.def("default_k", &default_k, py::arg("n"));
  m.def("eta_for_xi", &eta_for_xi, py::arg("n"), py::arg("xi"));
  m.def(
      "base_level_index",
      [](const QuantileLadder& l, double tau_e, const std::string& rule) {
        return base_level_index(l, tau_e, rule == "last" ? BaseLevel::Last : BaseLevel::First);
      },
      py::arg("ladder"), py::arg("tau_e"), py::arg("rule") = "first");

  m.def(
      "fit_ladder",
      [](const Vec& x, const Vec& y, const QuantileLadder& ladder, std::optional<double> lam, int knots,
         int degree, int penalty_order, const SolverConfig& solver) {
        const auto spec = basis_for(x, std::nullopt, std::nullopt, knots, degree);
        py::gil_scoped_release release;
        return fit_ladder(x, y, ladder, lambda_choice(lam), spec, penalty_order, solver);
      },
      py::arg("x"), py::arg("y"), py::arg("ladder"), py::arg("lam") = py::none(), py::arg("knots") = 40,
      py::arg("degree") = 3, py::arg("penalty_order") = 2, py::arg("solver") = SolverConfig{},
      "One fit per ladder level. lam=None selects lambda by GACV at the first level.");

  m.def("hill", [](const Vec& q) { return hill_from_quantiles(q); }, py::arg("quantiles"),
        "Hill-type index from ladder-ordered quantiles q_1 >= ... >= q_k.");

  m.def(
      "estimate_evi",
      [](const std::vector<QuantileFitModel>& fits, const QuantileLadder& ladder, const Vec& xs) {
        const auto e = estimate_evi(fits, ladder, xs);
        py::dict out;
        out["x"] = as_array(e.xs);
        out["gamma"] = as_array(e.gamma);
        out["valid"] = as_mask(e.valid);
        out["pooled"] = e.pooled;
        out["valid_count"] = e.valid_count;
        return out;
      },
      py::arg("fits"), py::arg("ladder"), py::arg("x"));

  m.def(
      "evi_sample_path",
      [](const std::vector<QuantileFitModel>& fits, const Vec& xs) {
        return as_array(pooled_sample_path(ladder_values(fits, xs)));
      },
      py::arg("fits"), py::arg("x"), "Pooled index using the first k' levels, k' = 2..k.");

  m.def(
      "classify_regime",
      [](double tau, std::int64_t n, double threshold) {
        const auto v = classify_regime(tau, n, threshold);
        py::dict out;
        out["xi"] = v.xi;
        out["threshold"] = v.threshold;
        out["regime"] = to_string(v.regime);
        return out;
      },
      py::arg("tau"), py::arg("n"), py::arg("threshold") = kDefaultRegimeThreshold);

  // extrapolate
  m.def("weissman_factor", &weissman_factor, py::arg("tau_i"), py::arg("tau_e"), py::arg("gamma"));
  m.def(
      "extrapolate_pooled",
      [](const QuantileFitModel& base, double gamma, double tau_e, const Vec& xs) {
        return extreme_dict(extrapolate_pooled(base, gamma, tau_e, xs));
      },
      py::arg("base"), py::arg("gamma"), py::arg("tau_e"), py::arg("x"));
  m.def(
      "extrapolate_pointwise",
      [](const QuantileFitModel& base, const Vec& gamma, double tau_e, const Vec& xs) {
        return extreme_dict(extrapolate_pointwise(base, gamma, tau_e, xs));
      },
      py::arg("base"), py::arg("gamma"), py::arg("tau_e"), py::arg("x"));

  // simlab
  m.def(
      "generate",
      [](const std::string& scenario, std::int64_t n, std::uint64_t seed) {
        const auto d = generate(parse_scenario(scenario), n, seed);
        return py::make_tuple(as_array(d.x), as_array(d.y));
      },
      py::arg("scenario"), py::arg("n"), py::arg("seed"));
  m.def(
      "true_quantile",
      [](const std::string& scenario, double tau, double x) {
        return true_quantile(parse_scenario(scenario), tau, x);
      },
      py::arg("scenario"), py::arg("tau"), py::arg("x"));
  m.def("mise", [](const Vec& grid, const Vec& est, const Vec& truth) { return mise(grid, est, truth); },
        py::arg("grid"), py::arg("estimate"), py::arg("truth"));

  m.def(
      "run_study",
      [](const std::vector<std::string>& scenarios, const std::vector<std::int64_t>& n_list, const Vec& tau_list,
         int replications, std::uint64_t seed, int knots, int threads, const std::vector<std::string>& estimators) {
        StudyConfig c;
        c.scenarios.clear();
        for (const auto& s : scenarios) c.scenarios.push_back(parse_scenario(s));
        c.estimators.clear();
        for (const auto& e : estimators) c.estimators.push_back(parse_estimator(e));
        c.sample_sizes = n_list;
        c.levels = tau_list;
        c.replications = replications;
        c.root_seed = seed;
        c.knots = knots;
        c.threads = threads;
        c.validate();
        StudyReport report;
        {
          py::gil_scoped_release release;
          report = run_study(c);
        }
        py::list rows;
        for (const auto& r : report.rows) {
          py::dict d;
          d["scenario"] = to_string(r.scenario);
          d["n"] = r.n;
          d["tau"] = r.tau;
          d["estimator"] = to_string(r.estimator);
          d["replications"] = r.replications;
          d["mise"] = r.mise;
          d["mc_stderr"] = r.mc_stderr;
          d["failures"] = r.failures;
          rows.append(d);
        }
        std::ostringstream csv;
        write_report_csv(report, csv);
        py::dict out;
        out["rows"] = rows;
        out["csv"] = csv.str();
        return out;
      },
      py::arg("scenarios") = std::vector<std::string>{"A"}, py::arg("n_list") = std::vector<std::int64_t>{200, 1000},
      py::arg("tau_list") = Vec{0.9, 0.995}, py::arg("replications") = 100, py::arg("seed") = 20240229,
      py::arg("knots") = 40, py::arg("threads") = 1,
      py::arg("estimators") = std::vector<std::string>{"PSE-I", "PSE-E", "PSE-Ep"});
}
