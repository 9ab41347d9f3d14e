#include "ligp/induced_state.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ligp/linalg.hpp"

namespace ligp {

namespace {

void check_inputs(const Matrix& x_n, const Vector& y_n, const Matrix& x_bar) {
  if (x_bar.rows() < 1) throw InvalidArgument("build_state: need at least one inducing point");
  if (x_n.rows() < x_bar.rows()) throw InvalidArgument("build_state: need n >= m");
  if (y_n.size() != x_n.rows()) throw InvalidArgument("build_state: y_n length does not match x_n rows");
  if (x_bar.cols() != x_n.cols()) throw InvalidArgument("build_state: x_bar and x_n dimension mismatch");
  if (!x_n.allFinite() || !y_n.allFinite() || !x_bar.allFinite()) {
    throw InvalidArgument("build_state: inputs must be finite");
  }
}

// K_m + eps_q I + k_nm^T Omega^-1 k_nm, lower triangle only.
Matrix assemble_q(const Matrix& k_m, const Matrix& k_nm, const Vector& omega, double eps_q) {
  Matrix q = k_m;
  q.diagonal().array() += eps_q;
  const Matrix scaled = omega.cwiseInverse().cwiseSqrt().asDiagonal() * k_nm;
  q.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
  return q;
}

void finalize(InducedState& s) {
  const Vector w = s.y_n.cwiseQuotient(s.omega);
  const Vector b = s.k_nm.transpose() * w;
  const Vector c = lower_solve(s.q_chol, b);
  s.alpha = lower_transpose_solve(s.q_chol, c);
  s.quad = s.y_n.dot(w) - c.squaredNorm();
  s.zero_response = s.y_n.isZero(0.0);
  if (s.zero_response) {
    s.quad = 0.0;
    s.nu_hat = 0.0;
  } else {
    s.nu_hat = s.quad / static_cast<double>(s.n());
  }
}

}  // namespace

InducedState build_state(const Matrix& x_n, const Vector& y_n, const Matrix& x_bar,
                         const KernelConfig& config) {
  check_inputs(x_n, y_n, x_bar);
  return build_state_from_distances(x_n, y_n, x_bar, config, squared_distance_matrix(x_bar, x_bar),
                                    squared_distance_matrix(x_n, x_bar));
}

InducedState build_state_from_distances(const Matrix& x_n, const Vector& y_n, const Matrix& x_bar,
                                        const KernelConfig& config, const Matrix& d_mm, const Matrix& d_nm) {
  config.validate();
  check_inputs(x_n, y_n, x_bar);
  if (d_mm.rows() != x_bar.rows() || d_mm.cols() != x_bar.rows() || d_nm.rows() != x_n.rows() ||
      d_nm.cols() != x_bar.rows()) {
    throw InvalidArgument("build_state: distance matrices do not match inputs");
  }

  InducedState s;
  s.x_n = x_n;
  s.y_n = y_n;
  s.x_bar = x_bar;
  s.config = config;

  const Matrix k_m = kernel_from_distances(d_mm, config.theta);
  Matrix kj = k_m;
  kj.diagonal().array() += config.eps_k;
  s.k_chol = cholesky_lower(kj, "K_m");

  s.k_nm = kernel_from_distances(d_nm, config.theta);
  const Matrix v = lower_solve(s.k_chol, Matrix(s.k_nm.transpose()));
  s.omega_raw = (1.0 + config.g) - v.colwise().squaredNorm().transpose().array();
  s.omega = s.omega_raw.cwiseMax(s.omega_floor());

  s.q_chol = cholesky_lower(assemble_q(k_m, s.k_nm, s.omega, config.eps_q), "Q_m");
  finalize(s);
  return s;
}

double neg_conc_loglik(const InducedState& s) {
  const double n = static_cast<double>(s.n());
  const double logdet_q = 2.0 * s.q_chol.diagonal().array().log().sum();
  const double logdet_k = 2.0 * s.k_chol.diagonal().array().log().sum();
  const double logdet_omega = s.omega.array().log().sum();
  const double data_term = s.quad > 0.0 ? n * std::log(s.quad) : -std::numeric_limits<double>::infinity();
  return data_term + logdet_q - logdet_k + logdet_omega;
}

double nu_hat(const InducedState& s) { return s.nu_hat; }

double scaled_variance(const InducedState& s, const Vector& x_star) {
  if (x_star.size() != s.dim()) throw InvalidArgument("predict: dimension mismatch");
  const Vector k = kernel_vector(s.x_bar, x_star, s.config.theta);
  const Vector t1 = lower_solve(s.k_chol, k);
  const Vector t2 = lower_solve(s.q_chol, k);
  return 1.0 + s.config.g - t1.squaredNorm() + t2.squaredNorm();
}

PredictiveMoments predict(const InducedState& s, const Vector& x_star) {
  if (x_star.size() != s.dim()) throw InvalidArgument("predict: dimension mismatch");
  const Vector k = kernel_vector(s.x_bar, x_star, s.config.theta);
  const Vector t1 = lower_solve(s.k_chol, k);
  const Vector t2 = lower_solve(s.q_chol, k);
  PredictiveMoments out;
  out.mean = k.dot(s.alpha);
  out.variance = s.nu_hat * (1.0 + s.config.g - t1.squaredNorm() + t2.squaredNorm());
  return out;
}

UpdateResult update_add_inducing(const InducedState& s, const Vector& x_new) {
  if (x_new.size() != s.dim()) throw InvalidArgument("update_add_inducing: dimension mismatch");
  if (!x_new.allFinite()) throw InvalidArgument("update_add_inducing: non-finite point");
  const double tol2 = kDuplicateTolerance * kDuplicateTolerance;
  for (Eigen::Index j = 0; j < s.m(); ++j) {
    if (squared_distance(s.x_bar.row(j), x_new) < tol2) {
      throw DegenerateUpdate("update_add_inducing: point duplicates inducing point " + std::to_string(j));
    }
  }

  const Eigen::Index m = s.m();
  const Eigen::Index n = s.n();
  const KernelConfig& cfg = s.config;
  UpdateResult out;
  UpdateWorkspace& ws = out.workspace;
  InducedState& t = out.state;

  // Partitioned update of the K factor.
  const Vector k_m_new = kernel_vector(s.x_bar, x_new, cfg.theta);
  const Vector l = lower_solve(s.k_chol, k_m_new);
  ws.rho = 1.0 + cfg.eps_k - l.squaredNorm();
  if (!(ws.rho > 0.0)) throw DegenerateUpdate("update_add_inducing: rho <= 0");
  ws.eta = lower_transpose_solve(s.k_chol, l);

  t.config = cfg;
  t.x_n = s.x_n;
  t.y_n = s.y_n;
  t.x_bar.resize(m + 1, s.dim());
  t.x_bar.topRows(m) = s.x_bar;
  t.x_bar.row(m) = x_new.transpose();

  t.k_chol = Matrix::Zero(m + 1, m + 1);
  t.k_chol.topLeftCorner(m, m) = s.k_chol;
  t.k_chol.block(m, 0, 1, m) = l.transpose();
  t.k_chol(m, m) = std::sqrt(ws.rho);

  // Omega shrinks by the squared residual of the new column.
  const Vector k_n_new = kernel_vector(s.x_n, x_new, cfg.theta);
  ws.zeta = s.k_nm * ws.eta;
  t.omega_raw = s.omega_raw.array() - (ws.zeta - k_n_new).array().square() / ws.rho;
  t.omega = t.omega_raw.cwiseMax(t.omega_floor());

  t.k_nm.resize(n, m + 1);
  t.k_nm.leftCols(m) = s.k_nm;
  t.k_nm.col(m) = k_n_new;

  // Q* uses the old columns with the new Omega; then border it.
  Matrix k_m(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j; i < m; ++i) {
      k_m(i, j) = std::exp(-squared_distance(s.x_bar.row(i), s.x_bar.row(j)) / cfg.theta);
    }
  }
  const Matrix q_star = assemble_q(k_m, s.k_nm, t.omega, cfg.eps_q);
  const Matrix lq_star = cholesky_lower(q_star, "Q_m*");

  const Vector w_new = k_n_new.cwiseQuotient(t.omega);
  ws.gamma = k_m_new + s.k_nm.transpose() * w_new;
  ws.psi = 1.0 + cfg.eps_q + k_n_new.dot(w_new);
  const Vector c = lower_solve(lq_star, ws.gamma);
  ws.upsilon = ws.psi - c.squaredNorm();
  if (!(ws.upsilon > 0.0)) throw DegenerateUpdate("update_add_inducing: upsilon <= 0");
  ws.xi = -lower_transpose_solve(lq_star, c) / ws.upsilon;

  t.q_chol = Matrix::Zero(m + 1, m + 1);
  t.q_chol.topLeftCorner(m, m) = lq_star;
  t.q_chol.block(m, 0, 1, m) = c.transpose();
  t.q_chol(m, m) = std::sqrt(ws.upsilon);

  finalize(t);
  return out;
}

}  // namespace ligp
