#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace xqr::detail {

// Symmetric positive definite matrix stored by its lower band:
// at(i, d) = A(i, i - d), 0 <= d <= bandwidth. Factored in place (Cholesky).
class BandedSpd {
 public:
  BandedSpd(int n, int bandwidth)
      : n_(n), bw_(bandwidth), data_(static_cast<std::size_t>(n) * (bandwidth + 1), 0.0) {}

  void zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  double& at(int i, int d) { return data_[static_cast<std::size_t>(i) * (bw_ + 1) + d]; }
  [[nodiscard]] double at(int i, int d) const {
    return data_[static_cast<std::size_t>(i) * (bw_ + 1) + d];
  }

  double* data() noexcept { return data_.data(); }

  [[nodiscard]] int size() const noexcept { return n_; }
  [[nodiscard]] int bandwidth() const noexcept { return bw_; }

  // Returns false on a nonpositive pivot.
  bool factor() {
    min_pivot_ = std::numeric_limits<double>::infinity();
    max_pivot_ = 0.0;
    for (int i = 0; i < n_; ++i) {
      const int lo = std::max(0, i - bw_);
      for (int j = lo; j <= i; ++j) {
        double s = at(i, i - j);
        for (int k = std::max(lo, j - bw_); k < j; ++k) s -= at(i, i - k) * at(j, j - k);
        if (i == j) {
          if (!(s > 0.0) || !std::isfinite(s)) return false;
          min_pivot_ = std::min(min_pivot_, s);
          max_pivot_ = std::max(max_pivot_, s);
          at(i, 0) = std::sqrt(s);
        } else {
          at(i, i - j) = s / at(j, 0);
        }
      }
    }
    return true;
  }

  // Ratio of smallest to largest squared pivot; a cheap reciprocal
  // condition estimate.
  [[nodiscard]] double pivot_ratio() const noexcept {
    return max_pivot_ > 0.0 ? min_pivot_ / max_pivot_ : 0.0;
  }

  void solve(Eigen::VectorXd& b) const {
    for (int i = 0; i < n_; ++i) {
      double s = b[i];
      for (int k = std::max(0, i - bw_); k < i; ++k) s -= at(i, i - k) * b[k];
      b[i] = s / at(i, 0);
    }
    for (int i = n_ - 1; i >= 0; --i) {
      double s = b[i];
      for (int k = i + 1; k <= std::min(n_ - 1, i + bw_); ++k) s -= at(k, k - i) * b[k];
      b[i] = s / at(i, 0);
    }
  }

 private:
  int n_;
  int bw_;
  std::vector<double> data_;
  double min_pivot_ = 0.0;
  double max_pivot_ = 0.0;
};

}  // namespace xqr::detail
