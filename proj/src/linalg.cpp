#include "ligp/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace ligp {

Matrix cholesky_lower(const Matrix& a, const std::string& name) {
  Eigen::LLT<Matrix, Eigen::Lower> llt(a);
  if (llt.info() != Eigen::Success) {
    throw IllConditioned(name, "Cholesky factorization failed (size " + std::to_string(a.rows()) + ")");
  }
  Matrix l = llt.matrixL();
  if (!l.allFinite() || (l.diagonal().array() <= 0.0).any()) {
    throw IllConditioned(name, "Cholesky factor has nonpositive or non-finite diagonal");
  }
  return l;
}

Matrix lower_solve(const Matrix& l, const Matrix& b) { return l.triangularView<Eigen::Lower>().solve(b); }
Vector lower_solve(const Matrix& l, const Vector& b) { return l.triangularView<Eigen::Lower>().solve(b); }

Matrix lower_transpose_solve(const Matrix& l, const Matrix& b) {
  return l.transpose().triangularView<Eigen::Upper>().solve(b);
}
Vector lower_transpose_solve(const Matrix& l, const Vector& b) {
  return l.transpose().triangularView<Eigen::Upper>().solve(b);
}

Matrix chol_solve(const Matrix& l, const Matrix& b) { return lower_transpose_solve(l, lower_solve(l, b)); }
Vector chol_solve(const Matrix& l, const Vector& b) { return lower_transpose_solve(l, lower_solve(l, b)); }

double trace_inv_product(const Matrix& chol_lower, const Matrix& w) {
  const Matrix z = lower_solve(chol_lower, w);                      // L^-1 W
  const Matrix y = lower_solve(chol_lower, Matrix(z.transpose()));  // L^-1 W L^-T
  return y.trace();
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile: p outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace ligp
