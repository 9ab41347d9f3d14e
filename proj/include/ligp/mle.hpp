#pragma once

#include <utility>

#include "ligp/induced_state.hpp"

namespace ligp {

struct MleResult {
  double theta = 1.0;
  double nu_hat = 0.0;
  double objective = 0.0;
  int evaluations = 0;
  bool converged = true;
};

/// Local lengthscale by minimizing neg_conc_loglik over log theta in [lo, hi],
/// starting from the bracket around theta0. lo == hi returns theta0 without
/// optimizing. Never returns an objective worse than at theta0.
MleResult mle_theta(const Matrix& x_n, const Vector& y_n, const Matrix& x_bar, double theta0,
                    std::pair<double, double> bounds, const KernelConfig& config);

}  // namespace ligp
