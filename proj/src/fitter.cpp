#include "xqr/fitter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include "banded.hpp"
#include "xqr/checkloss.hpp"
#include "xqr/error.hpp"

namespace xqr {

namespace {

constexpr double kSingularPivotRatio = 1e-15;

std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}

std::function<void(const std::string&)>& warning_handler() {
  static std::function<void(const std::string&)> handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

void warn(const std::string& msg) {
  std::lock_guard lock(warning_mutex());
  if (warning_handler()) warning_handler()(msg);
}

void factor_or_throw(detail::BandedSpd& a, const char* what) {
  if (!a.factor() || a.pivot_ratio() < kSingularPivotRatio) {
    std::ostringstream os;
    os << what << " is numerically singular (pivot ratio " << a.pivot_ratio() << ")";
    detail::fail(ErrorKind::SingularSystem, os.str());
  }
}

double sup_norm_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Adds sum_i w_i v_i v_i^T to the band of `a` and sum_i w_i y_i v_i to `rhs`,
// with w_i the IRLS weight of the residual at `coef`. Width is a template
// parameter for the common degrees so the row loops unroll.
template <int W>
void accumulate_rows(const SparseDesign& design, const std::vector<double>& products,
                     const std::vector<double>& ys, const Eigen::VectorXd& coef, double tau,
                     double alpha, detail::BandedSpd& a, Eigen::VectorXd& rhs, int width) {
  const int w_count = W > 0 ? W : width;
  const std::size_t np = static_cast<std::size_t>(w_count) * (w_count + 1) / 2;
  const int stride = a.bandwidth() + 1;
  double* band = a.data();
  double* rh = rhs.data();
  const double* cur = coef.data();
  const double* pp = products.data();
  const double* v = design.values.data();
  for (int i = 0; i < design.rows; ++i, pp += np, v += w_count) {
    const int f = design.first[i];
    double fitted = 0.0;
    for (int r = 0; r < w_count; ++r) fitted += v[r] * cur[f + r];
    const double w = detail::irls_weight_unchecked(tau, alpha, ys[i] - fitted);
    const double wy = w * ys[i];
    const double* q = pp;
    for (int r = 0; r < w_count; ++r) {
      rh[f + r] += wy * v[r];
      double* diag_entry = band + static_cast<std::size_t>(f + r) * stride + r;
      for (int c = 0; c <= r; ++c) diag_entry[-c] += w * *q++;
    }
  }
}

void accumulate_weighted(const SparseDesign& design, const std::vector<double>& products,
                         const std::vector<double>& ys, const Eigen::VectorXd& coef, double tau,
                         double alpha, detail::BandedSpd& a, Eigen::VectorXd& rhs) {
  switch (design.width) {
    case 2: accumulate_rows<2>(design, products, ys, coef, tau, alpha, a, rhs, 2); break;
    case 3: accumulate_rows<3>(design, products, ys, coef, tau, alpha, a, rhs, 3); break;
    case 4: accumulate_rows<4>(design, products, ys, coef, tau, alpha, a, rhs, 4); break;
    default: accumulate_rows<0>(design, products, ys, coef, tau, alpha, a, rhs, design.width);
  }
}

constexpr double kLineSearchFraction = 0.9;

// Minimizer over t >= 0 of sum_i rho_tau(r_i - t g_i) + lin t + quad t^2 / 2,
// a convex piecewise quadratic. NaN when the minimum is not attained.
double exact_line_search(const std::vector<double>& r, const std::vector<double>& g, double tau,
                         double lin, double quad) {
  double slope = lin;
  std::vector<std::pair<double, double>> kinks;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (g[i] == 0.0) continue;
    const double sign = r[i] != 0.0 ? (r[i] > 0.0 ? 1.0 : -1.0) : (g[i] > 0.0 ? -1.0 : 1.0);
    slope -= g[i] * (sign > 0.0 ? tau : tau - 1.0);
    const double t = r[i] / g[i];
    if (r[i] != 0.0 && t > 0.0) kinks.emplace_back(t, std::abs(g[i]));
  }
  if (slope >= 0.0) return 0.0;
  std::sort(kinks.begin(), kinks.end());
  double t0 = 0.0;
  for (const auto& [t, jump] : kinks) {
    if (quad > 0.0) {
      const double root = t0 - slope / quad;
      if (root <= t) return root;
      slope += quad * (t - t0);
    }
    slope += jump;
    t0 = t;
    if (slope >= 0.0) return t;
  }
  if (quad > 0.0) return t0 - slope / quad;
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void set_warning_handler(std::function<void(const std::string&)> handler) {
  std::lock_guard lock(warning_mutex());
  warning_handler() = std::move(handler);
}

void SolverConfig::validate() const {
  auto bad = [](const char* field, const char* rule) {
    detail::fail(ErrorKind::Config, std::string("solver ") + field + " " + rule);
  };
  if (!(alpha0 > 0.0)) bad("alpha0", "must be > 0");
  if (!(alpha_decay > 0.0 && alpha_decay < 1.0)) bad("alpha_decay", "must lie in (0, 1)");
  if (!(alpha_floor > 0.0)) bad("alpha_floor", "must be > 0");
  if (!(eta0 > 0.0)) bad("eta0", "must be > 0");
  if (!(eta_growth > 1.0)) bad("eta_growth", "must be > 1");
  if (max_iterations < 1) bad("max_iterations", "must be >= 1");
  if (!(coef_tol > 0.0)) bad("coef_tol", "must be > 0");
  if (!(objective_tol > 0.0)) bad("objective_tol", "must be > 0");
  if (max_inner < 1) bad("max_inner", "must be >= 1");
  if (polish_iterations < 0) bad("polish_iterations", "must be >= 0");
}

QuantileProblem::QuantileProblem(std::span<const double> xs, std::span<const double> ys,
                                 BasisSpec spec, int penalty_order)
    : xs_(xs.begin(), xs.end()), ys_(ys.begin(), ys.end()), spec_(std::move(spec)),
      order_(penalty_order) {
  if (xs.size() != ys.size()) detail::fail(ErrorKind::InvalidSize, "x and y lengths differ");
  if (xs.empty()) detail::fail(ErrorKind::Data, "no observations");
  for (double y : ys_)
    if (!std::isfinite(y)) detail::fail(ErrorKind::Data, "response contains non-finite values");
  design_ = sparse_design(spec_, xs_);
  products_.reserve(static_cast<std::size_t>(design_.rows) * design_.width * (design_.width + 1) / 2);
  for (int i = 0; i < design_.rows; ++i) {
    const auto v = design_.row(i);
    for (int r = 0; r < design_.width; ++r)
      for (int c = 0; c <= r; ++c) products_.push_back(v[r] * v[c]);
  }

  const int dim = spec_.dimension();
  const int bw = spec_.degree;
  if (spec_.degree == 0) {
    penalty_ = Eigen::MatrixXd::Zero(dim, dim);
  } else {
    penalty_ = penalty_matrix(spec_, order_).penalty;
  }
  penalty_band_.assign(static_cast<std::size_t>(dim) * (bw + 1), 0.0);
  for (int i = 0; i < dim; ++i)
    for (int d = 0; d <= std::min(bw, i); ++d)
      penalty_band_[static_cast<std::size_t>(i) * (bw + 1) + d] = penalty_(i, i - d);

  if (static_cast<int>(xs.size()) < dim) {
    std::ostringstream os;
    os << "n = " << xs.size() << " is below the basis dimension K + p = " << dim
       << "; the fit relies on the penalty";
    warn(os.str());
  }
}

double QuantileProblem::exact_objective(double tau, double lambda,
                                        const Eigen::VectorXd& coef) const {
  double loss = 0.0;
  detail::require_level(tau);
  for (int i = 0; i < design_.rows; ++i)
    loss += detail::pinball_unchecked(tau, ys_[i] - design_.dot(i, coef));
  if (lambda > 0.0) loss += lambda * coef.dot(penalty_ * coef);
  return loss;
}

Eigen::VectorXd QuantileProblem::least_squares(double lambda) const {
  const int dim = spec_.dimension();
  const int bw = spec_.degree;
  detail::BandedSpd a(dim, bw);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < dim; ++i)
    for (int d = 0; d <= std::min(bw, i); ++d)
      a.at(i, d) = lambda * penalty_band_[static_cast<std::size_t>(i) * (bw + 1) + d];
  for (int i = 0; i < design_.rows; ++i) {
    const auto v = design_.row(i);
    const int f = design_.first[i];
    for (int r = 0; r <= bw; ++r) {
      rhs[f + r] += v[r] * ys_[i];
      for (int c = 0; c <= r; ++c) a.at(f + r, r - c) += v[r] * v[c];
    }
  }
  factor_or_throw(a, "penalized least-squares system Z^T Z + lambda P");
  a.solve(rhs);
  return rhs;
}

QuantileFitModel QuantileProblem::fit(double tau, double lambda, const SolverConfig& cfg,
                                      const Eigen::VectorXd* start) const {
  detail::require_level(tau);
  cfg.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    detail::fail(ErrorKind::InvalidArgument, "lambda must be a finite non-negative number");
  if (spec_.degree == 0 && lambda > 0.0)
    detail::fail(ErrorKind::InvalidOrder, "degree-0 basis admits no derivative penalty; use lambda = 0");

  const int dim = spec_.dimension();
  const int bw = spec_.degree;

  QuantileFitModel model;
  model.basis = spec_;
  model.tau = tau;
  model.lambda = lambda;
  model.penalty_order = order_;

  Eigen::VectorXd b;
  if (start) {
    if (start->size() != dim) detail::fail(ErrorKind::InvalidSize, "start vector has wrong length");
    b = *start;
  } else {
    b = least_squares(lambda);
  }

  auto& diag = model.diagnostics;
  diag.initial_objective = exact_objective(tau, lambda, b);
  double previous_objective = diag.initial_objective;

  detail::BandedSpd a(dim, bw);
  Eigen::VectorXd rhs(dim);

  // One proximal step: IRLS on the alpha-smoothed loss plus eta ||b - anchor||^2.
  auto prox_step = [&](double alpha, double eta, const Eigen::VectorXd& anchor) {
    Eigen::VectorXd current = anchor;
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      for (int i = 0; i < dim; ++i)
        for (int d = 0; d <= std::min(bw, i); ++d)
          a.at(i, d) = lambda * penalty_band_[static_cast<std::size_t>(i) * (bw + 1) + d];
      for (int i = 0; i < dim; ++i) {
        a.at(i, 0) += eta;
        rhs[i] = eta * anchor[i];
      }
      accumulate_weighted(design_, products_, ys_, current, tau, alpha, a, rhs);
      factor_or_throw(a, "proximal IRLS system");
      a.solve(rhs);
      ++diag.inner_solves;
      const double change = sup_norm_diff(rhs, current);
      current = rhs;
      if (change < cfg.coef_tol / 10.0) break;
    }
    if (!current.allFinite())
      detail::fail(ErrorKind::SingularSystem, "solver produced non-finite coefficients");
    return current;
  };

  // At the finest width a short IRLS step is stretched toward the exact
  // minimizer along its direction. Landing on the minimizer itself would put
  // a residual exactly on a kink, where the IRLS weight pins it.
  std::vector<double> resid(static_cast<std::size_t>(design_.rows));
  std::vector<double> slope(resid.size());
  auto line_search = [&](const Eigen::VectorXd& anchor, Eigen::VectorXd& next) {
    const Eigen::VectorXd dir = next - anchor;
    for (int i = 0; i < design_.rows; ++i) {
      resid[static_cast<std::size_t>(i)] = ys_[i] - design_.dot(i, anchor);
      slope[static_cast<std::size_t>(i)] = design_.dot(i, dir);
    }
    double lin = 0.0, quad = 0.0;
    if (lambda > 0.0) {
      const Eigen::VectorXd pd = penalty_ * dir;
      lin = 2.0 * lambda * anchor.dot(pd);
      quad = 2.0 * lambda * dir.dot(pd);
    }
    const double t = exact_line_search(resid, slope, tau, lin, quad);
    if (!std::isfinite(t) || t <= 1.0) return;
    const Eigen::VectorXd candidate = anchor + (1.0 + kLineSearchFraction * (t - 1.0)) * dir;
    if (exact_objective(tau, lambda, candidate) < exact_objective(tau, lambda, next)) next = candidate;
  };

  double alpha = cfg.alpha0;
  double eta = cfg.eta0;
  bool settled = false;
  for (int t = 0; t < cfg.max_iterations; ++t) {
    alpha = std::max(cfg.alpha0 * std::pow(cfg.alpha_decay, t), cfg.alpha_floor);
    eta = cfg.eta0 * std::pow(cfg.eta_growth, t);
    const Eigen::VectorXd anchor = b;
    b = prox_step(alpha, eta, anchor);
    diag.iterations = t + 1;
    diag.last_step = sup_norm_diff(b, anchor);
    const double objective = exact_objective(tau, lambda, b);
    const bool stalled = std::abs(objective - previous_objective) <=
                             cfg.objective_tol * std::max(1.0, std::abs(objective)) &&
                         diag.last_step < 100.0 * cfg.coef_tol;
    previous_objective = objective;
    if (diag.last_step < cfg.coef_tol || stalled) {
      settled = true;
      break;
    }
  }

  // The growing eta_t freezes the iterates before the optimum is reached;
  // restart the proximal weight at the finest width until the steps vanish.
  if (cfg.polish_iterations > 0) {
    settled = false;
    alpha = cfg.alpha_floor;
    eta = cfg.eta0;
    for (int t = 0; t < cfg.polish_iterations; ++t) {
      const Eigen::VectorXd anchor = b;
      b = prox_step(alpha, eta, anchor);
      // Stop on the IRLS step: a line search blocked at a kink is not a fixed point.
      diag.last_step = sup_norm_diff(b, anchor);
      line_search(anchor, b);
      ++diag.polish_iterations;
      if (diag.last_step < cfg.coef_tol) {
        settled = true;
        break;
      }
    }
  }
  diag.converged = settled;

  diag.final_alpha = alpha;
  diag.final_eta = eta;
  diag.objective = exact_objective(tau, lambda, b);
  model.coefficients = std::move(b);
  return model;
}

double QuantileProblem::effective_df(const QuantileFitModel& model) const {
  const int dim = spec_.dimension();
  const LossParams params{model.tau, model.diagnostics.final_alpha};
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < design_.rows; ++i) {
    const double w = smoothed_pinball(params, ys_[i] - design_.dot(i, model.coefficients)).weight;
    const auto v = design_.row(i);
    const int f = design_.first[i];
    for (int r = 0; r < design_.width; ++r)
      for (int c = 0; c < design_.width; ++c) gram(f + r, f + c) += w * v[r] * v[c];
  }
  // The proximal term is a solver device; it is left out of the smoother.
  Eigen::MatrixXd m = gram + model.lambda * penalty_;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    detail::fail(ErrorKind::SingularSystem, "GACV smoother matrix is not positive definite");
  return llt.solve(gram).trace();
}

QuantileFitModel fit_intermediate(std::span<const double> xs, std::span<const double> ys, double tau,
                                  double lambda, const BasisSpec& spec, int penalty_order,
                                  const SolverConfig& cfg, const Eigen::VectorXd* start) {
  const QuantileProblem problem(xs, ys, spec, penalty_order);
  return problem.fit(tau, lambda, cfg, start);
}

const QuantileFitModel& GacvResult::selected_fit() const {
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!failed[i] && grid[i] == lambda) return fits[i];
  detail::fail(ErrorKind::AllFitsFailed, "no successful GACV fit");
}

GacvResult select_lambda_gacv(const QuantileProblem& problem, double tau,
                              std::span<const double> lambda_grid, const SolverConfig& cfg,
                              int threads) {
  detail::require_level(tau);
  if (lambda_grid.empty()) detail::fail(ErrorKind::InvalidArgument, "lambda grid is empty");
  for (double l : lambda_grid)
    if (!(l > 0.0) || !std::isfinite(l))
      detail::fail(ErrorKind::InvalidArgument, "lambda grid values must be positive");

  const std::size_t g = lambda_grid.size();
  GacvResult res;
  res.grid.assign(lambda_grid.begin(), lambda_grid.end());
  res.scores.assign(g, std::numeric_limits<double>::quiet_NaN());
  res.df.assign(g, std::numeric_limits<double>::quiet_NaN());
  res.fits.resize(g);
  res.failed.assign(g, 0);
  res.errors.assign(g, {});
  const double n = problem.size();

  auto evaluate = [&](std::size_t i) {
    try {
      QuantileFitModel model = problem.fit(tau, res.grid[i], cfg);
      const double df = problem.effective_df(model);
      double loss = 0.0;
      const auto xs = problem.xs();
      const auto ys = problem.ys();
      const auto fitted = predict(model, xs);
      for (std::size_t r = 0; r < ys.size(); ++r) loss += pinball(tau, ys[r] - fitted[r]);
      res.df[i] = df;
      res.scores[i] = df < n ? loss / (n - df) : std::numeric_limits<double>::infinity();
      res.fits[i] = std::move(model);
    } catch (const Error& e) {
      res.failed[i] = 1;
      res.errors[i] = e.what();
    }
  };

  const int workers = std::clamp(threads, 1, static_cast<int>(g));
  if (workers == 1) {
    for (std::size_t i = 0; i < g; ++i) evaluate(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < g; i = next++) evaluate(i);
      });
    for (auto& th : pool) th.join();
  }

  bool any = false;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g; ++i) {
    if (res.failed[i] || !std::isfinite(res.scores[i])) continue;
    const double s = res.scores[i];
    if (!any || s < best || (s == best && res.grid[i] > res.lambda)) {
      best = s;
      res.lambda = res.grid[i];
      any = true;
    }
  }
  if (!any) {
    bool all_failed = std::all_of(res.failed.begin(), res.failed.end(), [](char f) { return f; });
    std::ostringstream os;
    os << (all_failed ? "every GACV fit failed" : "no lambda gave df < n");
    for (const auto& e : res.errors)
      if (!e.empty()) {
        os << "; first error: " << e;
        break;
      }
    detail::fail(ErrorKind::AllFitsFailed, os.str());
  }
  return res;
}

GacvResult select_lambda_gacv(std::span<const double> xs, std::span<const double> ys, double tau,
                              const BasisSpec& spec, int penalty_order,
                              std::span<const double> lambda_grid, const SolverConfig& cfg) {
  const QuantileProblem problem(xs, ys, spec, penalty_order);
  return select_lambda_gacv(problem, tau, lambda_grid, cfg);
}

double response_scale(std::span<const double> ys) {
  if (ys.empty()) return 1.0;
  std::vector<double> v(ys.begin(), ys.end());
  auto median = [](std::vector<double>& w) {
    const std::size_t mid = w.size() / 2;
    std::nth_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(mid), w.end());
    double m = w[mid];
    if (w.size() % 2 == 0) {
      m = 0.5 * (m + *std::max_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
  };
  const double med = median(v);
  for (std::size_t i = 0; i < ys.size(); ++i) v[i] = std::abs(ys[i] - med);
  const double mad = 1.4826 * median(v);
  if (mad > 0.0 && std::isfinite(mad)) return mad;
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double ss = 0.0;
  for (double y : ys) ss += (y - mean) * (y - mean);
  const double sd = ys.size() > 1 ? std::sqrt(ss / static_cast<double>(ys.size() - 1)) : 0.0;
  return sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
}

std::vector<double> default_lambda_grid(std::span<const double> ys, int count, double lo, double hi) {
  if (count < 1) detail::fail(ErrorKind::InvalidArgument, "lambda grid needs at least one point");
  if (!(lo > 0.0 && hi >= lo)) detail::fail(ErrorKind::InvalidArgument, "lambda grid bounds invalid");
  const double scale = response_scale(ys);
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[i] = std::exp(llo + frac * (lhi - llo)) / scale;
  }
  return grid;
}

LadderFitResult fit_ladder(const QuantileProblem& problem, const QuantileLadder& ladder,
                           const LambdaChoice& lambda, const SolverConfig& cfg, bool warm_start) {
  if (ladder.levels.empty()) detail::fail(ErrorKind::InvalidSize, "ladder has no levels");
  for (double tau : ladder.levels) detail::require_level(tau, "ladder level");

  std::vector<double> grid = lambda.grid;
  if (lambda.policy != LambdaPolicy::Fixed && grid.empty()) grid = default_lambda_grid(problem.ys());

  auto tagged = [](const Error& e, std::size_t j, double tau) {
    std::ostringstream os;
    os << "ladder level tau_" << j + 1 << " = " << tau << ": " << e.what();
    return Error(e.kind(), os.str());
  };

  LadderFitResult out;
  out.fits.reserve(ladder.levels.size());
  double shared_lambda = lambda.value;
  for (std::size_t j = 0; j < ladder.levels.size(); ++j) {
    const double tau = ladder.levels[j];
    try {
      const Eigen::VectorXd* start =
          warm_start && j > 0 ? &out.fits.back().coefficients : nullptr;
      if (lambda.policy == LambdaPolicy::GacvEachLevel ||
          (lambda.policy == LambdaPolicy::GacvFirstLevel && j == 0)) {
        GacvResult sel = select_lambda_gacv(problem, tau, grid, cfg);
        shared_lambda = sel.lambda;
        if (start == nullptr) {
          out.fits.push_back(sel.selected_fit());
        } else {
          out.fits.push_back(problem.fit(tau, shared_lambda, cfg, start));
        }
        if (j == 0) out.selection = std::move(sel);
      } else {
        out.fits.push_back(problem.fit(tau, shared_lambda, cfg, start));
      }
    } catch (const Error& e) {
      throw tagged(e, j, tau);
    }
  }
  return out;
}

std::vector<QuantileFitModel> fit_ladder(std::span<const double> xs, std::span<const double> ys,
                                         const QuantileLadder& ladder, const LambdaChoice& lambda,
                                         const BasisSpec& spec, int penalty_order,
                                         const SolverConfig& cfg, bool warm_start) {
  const QuantileProblem problem(xs, ys, spec, penalty_order);
  return fit_ladder(problem, ladder, lambda, cfg, warm_start).fits;
}

std::vector<double> ladder_monotonicity(std::span<const QuantileFitModel> fits,
                                        std::span<const double> grid) {
  std::vector<double> out;
  if (fits.size() < 2 || grid.empty()) return out;
  std::vector<std::vector<double>> values;
  values.reserve(fits.size());
  for (const auto& f : fits) values.push_back(predict(f, grid));
  for (std::size_t j = 0; j + 1 < fits.size(); ++j) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) ok += values[j][i] >= values[j + 1][i];
    out.push_back(static_cast<double>(ok) / static_cast<double>(grid.size()));
  }
  return out;
}

}  // namespace xqr
