#include "xqr/student_t.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>

#include "xqr/error.hpp"

namespace xqr {

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) detail::fail(ErrorKind::InvalidArgument, "degrees of freedom must be > 0");
  if (std::isnan(t)) return t;
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * boost::math::ibeta(0.5 * dof, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream os;
    os << "probability must lie in (0, 1), got " << p;
    detail::fail(ErrorKind::InvalidLevel, os.str());
  }
  if (!(dof > 0.0)) detail::fail(ErrorKind::InvalidArgument, "degrees of freedom must be > 0");
  if (p == 0.5) return 0.0;
  // Work in the upper half and reflect; the t law is symmetric.
  const double upper = p > 0.5 ? p : 1.0 - p;
  auto f = [&](double t) { return student_t_cdf(t, dof) - upper; };
  double lo = 0.0, hi = 1.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) detail::fail(ErrorKind::InvalidArgument, "t quantile bracket diverged");
  }
  std::uintmax_t max_iter = 200;
  const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(1.0, std::abs(a)); };
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, max_iter);
  const double q = 0.5 * (a + b);
  return p > 0.5 ? q : -q;
}

}  // namespace xqr
