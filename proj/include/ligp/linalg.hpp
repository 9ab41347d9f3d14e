#pragma once

#include <string>

#include "ligp/kernel.hpp"

namespace ligp {

/// Lower Cholesky factor of the lower triangle of `a`; throws IllConditioned
/// naming `name` on failure.
Matrix cholesky_lower(const Matrix& a, const std::string& name);

/// L^-1 B for lower-triangular L.
Matrix lower_solve(const Matrix& chol_lower, const Matrix& b);
Vector lower_solve(const Matrix& chol_lower, const Vector& b);
/// L^-T B for lower-triangular L.
Matrix lower_transpose_solve(const Matrix& chol_lower, const Matrix& b);
Vector lower_transpose_solve(const Matrix& chol_lower, const Vector& b);
/// (L L^T)^-1 B.
Matrix chol_solve(const Matrix& chol_lower, const Matrix& b);
Vector chol_solve(const Matrix& chol_lower, const Vector& b);

/// tr(A^-1 W) for A = L L^T and symmetric W, without forming A^-1.
double trace_inv_product(const Matrix& chol_lower, const Matrix& w);

/// Empirical quantile with linear interpolation (type 7), p in [0, 1].
double quantile(std::vector<double> values, double p);

}  // namespace ligp
