#include "xqr/bspline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "xqr/error.hpp"

namespace xqr {

namespace {

void require_in_domain(const BasisSpec& spec, double x) {
  if (!spec.contains(x)) {
    std::ostringstream os;
    os << "x = " << x << " outside [" << spec.lower << ", " << spec.upper << "]";
    detail::fail(ErrorKind::OutOfDomain, os.str());
  }
}

void require_order(const BasisSpec& spec, int order) {
  if (order < 1 || order > spec.degree) {
    std::ostringstream os;
    os << "penalty order m = " << order << " must satisfy 1 <= m <= p = " << spec.degree;
    detail::fail(ErrorKind::InvalidOrder, os.str());
  }
}

// D_1 for a degree-q basis with knot vector t: d_i = q (c_{i+1} - c_i) / (t_{i+q+1} - t_{i+1}).
Eigen::MatrixXd first_difference(const BasisSpec& spec) {
  const int q = spec.degree;
  const int dim = spec.dimension();
  const auto& t = spec.knots;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(dim - 1, dim);
  for (int i = 0; i < dim - 1; ++i) {
    const double scale = q / (t[i + q + 1] - t[i + 1]);
    d(i, i) = -scale;
    d(i, i + 1) = scale;
  }
  return d;
}

}  // namespace

BasisSpec make_basis(double a, double b, int interior, int degree) {
  if (!(std::isfinite(a) && std::isfinite(b)) || !(a < b)) {
    std::ostringstream os;
    os << "empty domain: need a < b, got a = " << a << ", b = " << b;
    detail::fail(ErrorKind::InvalidDomain, os.str());
  }
  if (interior < 1) detail::fail(ErrorKind::InvalidSize, "number of knot intervals K must be >= 1");
  if (degree < 0) detail::fail(ErrorKind::InvalidOrder, "degree must be non-negative");

  BasisSpec spec;
  spec.degree = degree;
  spec.interior = interior;
  spec.lower = a;
  spec.upper = b;
  spec.knots.reserve(static_cast<std::size_t>(interior + 2 * degree + 1));
  for (int i = 0; i < degree; ++i) spec.knots.push_back(a);
  const double h = (b - a) / interior;
  spec.knots.push_back(a);
  for (int j = 1; j < interior; ++j) spec.knots.push_back(a + j * h);
  spec.knots.push_back(b);
  for (int i = 0; i < degree; ++i) spec.knots.push_back(b);
  return spec;
}

int find_span(const BasisSpec& spec, double x) {
  require_in_domain(spec, x);
  const int p = spec.degree;
  const int last = p + spec.interior - 1;
  if (x >= spec.upper) return last;
  auto begin = spec.knots.begin() + p;
  auto end = spec.knots.begin() + p + spec.interior + 1;
  const int s = static_cast<int>(std::upper_bound(begin, end, x) - spec.knots.begin()) - 1;
  return std::clamp(s, p, last);
}

int eval_basis_nonzero(const BasisSpec& spec, double x, std::span<double> out) {
  const int p = spec.degree;
  const int span = find_span(spec, x);
  const auto& t = spec.knots;

  // Cox-de Boor, triangular form (Piegl & Tiller A2.2).
  std::array<double, 16> left_small{}, right_small{};
  std::vector<double> left_big, right_big;
  double* left = left_small.data();
  double* right = right_small.data();
  if (p + 1 > static_cast<int>(left_small.size())) {
    left_big.assign(static_cast<std::size_t>(p + 1), 0.0);
    right_big.assign(static_cast<std::size_t>(p + 1), 0.0);
    left = left_big.data();
    right = right_big.data();
  }

  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
  return span - p;
}

Eigen::VectorXd eval_basis(const BasisSpec& spec, double x) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(spec.dimension());
  std::vector<double> local(static_cast<std::size_t>(spec.degree + 1));
  const int first = eval_basis_nonzero(spec, x, local);
  for (int r = 0; r <= spec.degree; ++r) full[first + r] = local[r];
  return full;
}

Eigen::MatrixXd design_matrix(const BasisSpec& spec, std::span<const double> xs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, spec.dimension());
  std::vector<double> local(static_cast<std::size_t>(spec.degree + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int first = eval_basis_nonzero(spec, xs[i], local);
    for (int r = 0; r <= spec.degree; ++r) z(i, first + r) = local[r];
  }
  return z;
}

double SparseDesign::dot(int i, const Eigen::VectorXd& coef) const {
  const auto r = row(i);
  const int f = first[i];
  double acc = 0.0;
  for (int j = 0; j < width; ++j) acc += r[j] * coef[f + j];
  return acc;
}

SparseDesign sparse_design(const BasisSpec& spec, std::span<const double> xs) {
  SparseDesign z;
  z.rows = static_cast<int>(xs.size());
  z.cols = spec.dimension();
  z.width = spec.degree + 1;
  z.first.resize(xs.size());
  z.values.resize(xs.size() * static_cast<std::size_t>(z.width));
  for (int i = 0; i < z.rows; ++i) {
    std::span<double> out(z.values.data() + static_cast<std::size_t>(i) * z.width,
                          static_cast<std::size_t>(z.width));
    z.first[i] = eval_basis_nonzero(spec, xs[i], out);
  }
  return z;
}

Eigen::MatrixXd difference_operator(const BasisSpec& spec, int order) {
  require_order(spec, order);
  // D_m = D_1[p-m+1] * ... * D_1[p-1] * D_1[p]; each factor acts on the
  // clamped basis of one lower degree over the same interior knots.
  Eigen::MatrixXd d = first_difference(spec);
  for (int step = 1; step < order; ++step) {
    const BasisSpec lower = make_basis(spec.lower, spec.upper, spec.interior, spec.degree - step);
    d = first_difference(lower) * d;
  }
  return d;
}

void gauss_legendre(int count, std::vector<double>& nodes, std::vector<double>& weights) {
  if (count < 1) detail::fail(ErrorKind::InvalidSize, "Gauss-Legendre needs at least one node");
  nodes.assign(static_cast<std::size_t>(count), 0.0);
  weights.assign(static_cast<std::size_t>(count), 0.0);
  const int half = (count + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= count; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = count * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    if (count == 1) {
      z = 0.0;
      dp = 1.0;
    }
    nodes[i] = -z;
    nodes[count - 1 - i] = z;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    weights[i] = w;
    weights[count - 1 - i] = w;
  }
}

Eigen::MatrixXd gram_matrix(const BasisSpec& spec) {
  const int p = spec.degree;
  const int dim = spec.dimension();
  std::vector<double> nodes, weights;
  gauss_legendre(p + 1, nodes, weights);

  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<double> local(static_cast<std::size_t>(p + 1));
  for (int s = p; s < p + spec.interior; ++s) {
    const double lo = spec.knots[s];
    const double hi = spec.knots[s + 1];
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double x = mid + half * nodes[q];
      const int first = eval_basis_nonzero(spec, x, local);
      const double w = half * weights[q];
      for (int i = 0; i <= p; ++i)
        for (int j = 0; j <= p; ++j) r(first + i, first + j) += w * local[i] * local[j];
    }
  }
  return 0.5 * (r + r.transpose());
}

PenaltyOperator penalty_matrix(const BasisSpec& spec, int order) {
  PenaltyOperator op;
  op.order = order;
  op.difference = difference_operator(spec, order);
  // R on the degree-(p-m) basis keeps D_m^T R D_m dimensionally consistent.
  const BasisSpec reduced = make_basis(spec.lower, spec.upper, spec.interior, spec.degree - order);
  op.gram = gram_matrix(reduced);
  Eigen::MatrixXd p = op.difference.transpose() * op.gram * op.difference;
  op.penalty = 0.5 * (p + p.transpose());
  return op;
}

}  // namespace xqr
