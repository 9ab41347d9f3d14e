#pragma once

#include "ligp/induced_state.hpp"

namespace ligp {

/// Dense GP on a (small) data set: K + g I factored directly, O(n^3).
/// Used by the nearest-neighbor and ALC local comparators.
struct DenseGp {
  Matrix x;
  Vector y;
  double theta = 1.0;
  double g = 0.0;
  Matrix chol;    ///< lower factor of K + g I
  Vector kinv_y;  ///< (K + g I)^-1 y
  double quad = 0.0;
  double nu_hat = 0.0;

  Eigen::Index n() const { return x.rows(); }
};

DenseGp fit_dense_gp(const Matrix& x, const Vector& y, double theta, double g);

/// n log(y^T (K + gI)^-1 y) + log|K + gI|, same convention as the induced model.
double neg_conc_loglik(const DenseGp& gp);

PredictiveMoments predict(const DenseGp& gp, const Vector& x_star);

/// Kernel part of the variance: 1 + g - k^T (K + gI)^-1 k.
double scaled_variance(const DenseGp& gp, const Vector& x_star);

struct ThetaFit {
  double theta = 1.0;
  double nu_hat = 0.0;
  double objective = 0.0;
  int evaluations = 0;
  bool converged = true;
};

/// Profile-likelihood lengthscale for the dense model over [lo, hi] (log scale).
ThetaFit mle_theta_dense(const Matrix& x, const Vector& y, double theta0, double lo, double hi, double g);

/// Separable-lengthscale dense GP fitted by maximum likelihood (nugget too),
/// used for global input pre-scaling.
struct SeparableFit {
  Vector lengthscales;
  double g = 0.0;
  double objective = 0.0;
  bool converged = false;
};

SeparableFit fit_separable_mle(const Matrix& x, const Vector& y, const Vector& theta0, double g0);

}  // namespace ligp
