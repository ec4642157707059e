#pragma once

namespace xqr {

/// P(T <= t) for Student's t with `dof` degrees of freedom, through the
/// regularized incomplete beta function.
double student_t_cdf(double t, double dof);

/// Inverse of student_t_cdf by bracketing and TOMS 748 root finding,
/// absolute tolerance well under 1e-10.
double student_t_quantile(double p, double dof);

}  // namespace xqr
