#include "xqr/model.hpp"

namespace xqr {

double QuantileFitModel::operator()(double x) const {
  std::vector<double> local(static_cast<std::size_t>(basis.degree + 1));
  const int first = eval_basis_nonzero(basis, x, local);
  double acc = 0.0;
  for (int r = 0; r <= basis.degree; ++r) acc += local[r] * coefficients[first + r];
  return acc;
}

std::vector<double> predict(const QuantileFitModel& model, std::span<const double> xs) {
  const SparseDesign z = sparse_design(model.basis, xs);
  std::vector<double> out(xs.size());
  for (int i = 0; i < z.rows; ++i) out[i] = z.dot(i, model.coefficients);
  return out;
}

}  // namespace xqr
