#pragma once

#include "ligp/kernel.hpp"

namespace ligp {

/// Mean and variance at one testing location, in response units.
struct PredictiveMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Cached factorizations of a diagonal-corrected Nystrom GP over one
/// neighborhood (x_n, y_n) and inducing set x_bar.
///
/// With Kj = K_m + eps_k I, Omega = max(diag(1 + g - k_nm Kj^-1 k_nm^T), g + eps_k)
/// and Q = K_m + eps_q I + k_nm^T Omega^-1 k_nm, the scaled covariance of y_n is
/// Sigma / nu = Omega + k_nm Kj^-1 k_nm^T, inverted via Woodbury through Q.
/// When eps_q == eps_k the Woodbury route is exact for that covariance.
///
/// Immutable after construction; safe to share across threads for predict().
struct InducedState {
  Matrix x_n;
  Vector y_n;
  Matrix x_bar;
  KernelConfig config;

  Matrix k_chol;     ///< lower factor of K_m + eps_k I (m x m)
  Matrix k_nm;       ///< n x m cross kernel
  Vector omega_raw;  ///< unclamped Omega diagonal
  Vector omega;      ///< clamped below at g + eps_k
  Matrix q_chol;     ///< lower factor of Q (m x m)
  Vector alpha;      ///< Q^-1 k_nm^T Omega^-1 y_n
  double quad = 0.0; ///< y_n^T (Sigma/nu)^-1 y_n
  double nu_hat = 0.0;
  bool zero_response = false;

  Eigen::Index n() const { return x_n.rows(); }
  Eigen::Index m() const { return x_bar.rows(); }
  Eigen::Index dim() const { return x_n.cols(); }
  double omega_floor() const { return config.g + config.eps_k; }
};

/// Partitioned-inverse quantities produced when a point joins the inducing set.
struct UpdateWorkspace {
  double rho = 0.0;   ///< 1 + eps_k - k_m(x)^T Kj^-1 k_m(x)
  Vector eta;         ///< Kj^-1 k_m(x)
  Vector zeta;        ///< k_nm eta
  Vector gamma;       ///< off-diagonal column of Q_{m+1}
  double psi = 0.0;   ///< corner of Q_{m+1}
  double upsilon = 0.0;
  Vector xi;          ///< -Q*^-1 gamma / upsilon
};

struct UpdateResult {
  InducedState state;
  UpdateWorkspace workspace;
};

/// Minimum distance between inducing points, below which an addition is
/// rejected as a duplicate.
inline constexpr double kDuplicateTolerance = 1e-8;

InducedState build_state(const Matrix& x_n, const Vector& y_n, const Matrix& x_bar,
                         const KernelConfig& config);

/// build_state with precomputed squared distances: d_mm is m x m among
/// x_bar, d_nm is n x m between x_n and x_bar. Lets a lengthscale search
/// reuse geometry across evaluations.
InducedState build_state_from_distances(const Matrix& x_n, const Vector& y_n, const Matrix& x_bar,
                                        const KernelConfig& config, const Matrix& d_mm, const Matrix& d_nm);

/// n log(y^T (Sigma/nu)^-1 y) + log|Q| - log|Kj| + sum log Omega.
/// Twice the profiled negative log-likelihood, minus a constant in n.
double neg_conc_loglik(const InducedState& state);

/// y^T (Sigma/nu)^-1 y / n; zero (and state.zero_response set) when y_n == 0.
double nu_hat(const InducedState& state);

/// Predictive variance divided by nu: 1 + g - k^T (Kj^-1 - Q^-1) k.
double scaled_variance(const InducedState& state, const Vector& x_star);

PredictiveMoments predict(const InducedState& state, const Vector& x_star);

/// Adds one inducing point using sequential partitioned updates of the
/// factors; throws DegenerateUpdate for duplicates or rho/upsilon <= 0.
UpdateResult update_add_inducing(const InducedState& state, const Vector& x_new);

}  // namespace ligp
