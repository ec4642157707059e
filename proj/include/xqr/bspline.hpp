/**
 * @file bspline.hpp
 * @brief Clamped B-spline bases, design matrices and the integrated
 *        squared-derivative penalty.
 *
 * Knot layout for degree p with K interior intervals on [a, b]:
 *
 *   knots = (a, ..., a, k_1, ..., k_{K-1}, b, ..., b)
 *            \_ p+1 _/                    \_ p+1 _/
 *
 * so the basis has K + p functions. Index i (0-based) is supported on
 * [knots[i], knots[i + p + 1]].
 */
#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace xqr {

struct BasisSpec {
  int degree = 3;
  int interior = 1;  ///< number of knot intervals K
  double lower = 0.0;
  double upper = 1.0;
  std::vector<double> knots;  ///< length K + 2p + 1, boundary knots repeated

  [[nodiscard]] int dimension() const noexcept { return interior + degree; }
  [[nodiscard]] bool contains(double x) const noexcept { return x >= lower && x <= upper; }
};

/// Equally spaced interior knots on [a, b].
BasisSpec make_basis(double a, double b, int interior, int degree);

/// Index s of the knot span with knots[s] <= x < knots[s+1]; x == upper maps
/// to the last non-empty span. Nonzero basis functions at x are s-p .. s.
int find_span(const BasisSpec& spec, double x);

/// The p+1 basis values that can be nonzero at x, starting at basis index
/// `span - degree`. Written into `out` (size degree + 1).
int eval_basis_nonzero(const BasisSpec& spec, double x, std::span<double> out);

/// Full basis vector (length K + p) via Cox-de Boor recursion.
Eigen::VectorXd eval_basis(const BasisSpec& spec, double x);

/// Dense n x (K + p) design matrix. Row i equals eval_basis(spec, xs[i]).
Eigen::MatrixXd design_matrix(const BasisSpec& spec, std::span<const double> xs);

/// Row-compressed design: each row stores its first nonzero column and the
/// degree + 1 values from there on.
struct SparseDesign {
  int rows = 0;
  int cols = 0;
  int width = 0;
  std::vector<int> first;
  std::vector<double> values;  ///< rows * width, row-major

  [[nodiscard]] std::span<const double> row(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * width, static_cast<std::size_t>(width)};
  }
  [[nodiscard]] double dot(int i, const Eigen::VectorXd& coef) const;
};

SparseDesign sparse_design(const BasisSpec& spec, std::span<const double> xs);

/// D_m: maps coefficients of s to the coefficients of s^(m) in the
/// degree-(p-m) basis on the same interior knots. Shape (K+p-m) x (K+p).
Eigen::MatrixXd difference_operator(const BasisSpec& spec, int order);

/// R_ij = integral of B_i B_j over [a, b], per-span Gauss-Legendre with p+1
/// nodes (exact for the degree-2p integrand).
Eigen::MatrixXd gram_matrix(const BasisSpec& spec);

struct PenaltyOperator {
  int order = 2;
  Eigen::MatrixXd difference;  ///< D_m
  Eigen::MatrixXd gram;        ///< Gram matrix of the degree-(p-m) basis
  Eigen::MatrixXd penalty;     ///< D_m^T R D_m

  [[nodiscard]] double quadratic_form(const Eigen::VectorXd& coef) const {
    return coef.dot(penalty * coef);
  }
};

/// b^T P b equals the integral of {s^(m)(x)}^2 over [a, b].
PenaltyOperator penalty_matrix(const BasisSpec& spec, int order);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int count, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace xqr
