#include "ligp/criteria.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ligp/linalg.hpp"

namespace ligp {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

double erf_diff(double u, double v) {
  if (u > 0.0 && v > 0.0) return std::erfc(v) - std::erfc(u);
  if (u < 0.0 && v < 0.0) return std::erfc(-u) - std::erfc(-v);
  return std::erf(u) - std::erf(v);
}

double w_factor(double a, double b, double x_star, double theta, double lo, double hi) {
  const double iota = x_star + a + b;
  const double s = std::sqrt(3.0 * theta);
  const double expo = 2.0 / (3.0 * theta) * (a * x_star + b * x_star + a * b - x_star * x_star - a * a - b * b);
  return std::sqrt(kPi * theta / 12.0) * std::exp(expo) * erf_diff((iota - 3.0 * lo) / s, (iota - 3.0 * hi) / s);
}

double w_factor_db(double a, double b, double x_star, double theta, double lo, double hi) {
  const double iota = x_star + a + b;
  const double s2 = 3.0 * theta;
  const double s = std::sqrt(s2);
  const double expo = 2.0 / s2 * (a * x_star + b * x_star + a * b - x_star * x_star - a * a - b * b);
  const double lo_arg = iota - 3.0 * lo;
  const double hi_arg = iota - 3.0 * hi;
  const double bracket = 2.0 / s2 * (x_star + a - 2.0 * b) * erf_diff(lo_arg / s, hi_arg / s) +
                         2.0 / std::sqrt(kPi * s2) * (std::exp(-lo_arg * lo_arg / s2) - std::exp(-hi_arg * hi_arg / s2));
  return std::sqrt(kPi * theta / 12.0) * std::exp(expo) * bracket;
}

double w_entry(const Vector& xbar_i, const Vector& xbar_j, const Vector& x_star, double theta,
               const Domain& domain) {
  if (!(theta > 0.0)) throw InvalidArgument("w_entry: theta must be positive");
  double w = 1.0;
  for (Eigen::Index k = 0; k < x_star.size(); ++k) {
    w *= w_factor(xbar_i(k), xbar_j(k), x_star(k), theta, domain.lower(k), domain.upper(k));
  }
  return w;
}

WimseEvaluator::WimseEvaluator(const InducedState& state, const Domain& domain, const Vector& x_star)
    : state_(state), domain_(domain), x_star_(x_star), theta_(state.config.theta) {
  const Eigen::Index d = state.dim();
  if (domain.dim() != d || x_star.size() != d) throw InvalidArgument("WimseEvaluator: dimension mismatch");
  const Eigen::Index m = state.m();
  const double sq = std::sqrt(theta_);
  erf_const_ = 1.0 + state.config.g;
  w_dims_.assign(static_cast<std::size_t>(d), Matrix(m, m));
  w_star_ = Matrix::Ones(m, m);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double lo = domain.lower(k);
    const double hi = domain.upper(k);
    erf_const_ *= std::sqrt(theta_ * kPi) / 2.0 * erf_diff((x_star(k) - lo) / sq, (x_star(k) - hi) / sq);
    Matrix& wk = w_dims_[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = j; i < m; ++i) {
        wk(i, j) = w_factor(state.x_bar(i, k), state.x_bar(j, k), x_star(k), theta_, lo, hi);
        wk(j, i) = wk(i, j);
      }
    }
    w_star_.array() *= wk.array();
  }
}

Matrix WimseEvaluator::augmented_w(const Vector& x, std::vector<Vector>* last_factors) const {
  const Eigen::Index m = state_.m();
  const Eigen::Index d = state_.dim();
  Matrix w(m + 1, m + 1);
  w.topLeftCorner(m, m) = w_star_;
  Vector last = Vector::Ones(m + 1);
  if (last_factors) last_factors->assign(static_cast<std::size_t>(d), Vector(m + 1));
  for (Eigen::Index k = 0; k < d; ++k) {
    const double lo = domain_.lower(k);
    const double hi = domain_.upper(k);
    for (Eigen::Index j = 0; j <= m; ++j) {
      const double a = j < m ? state_.x_bar(j, k) : x(k);
      const double f = w_factor(a, x(k), x_star_(k), theta_, lo, hi);
      last(j) *= f;
      if (last_factors) (*last_factors)[static_cast<std::size_t>(k)](j) = f;
    }
  }
  w.col(m) = last;
  w.row(m) = last.transpose();
  return w;
}

double WimseEvaluator::value(const Vector& x_cand) const {
  if (x_cand.size() != state_.dim()) throw InvalidArgument("wimse: dimension mismatch");
  UpdateResult up;
  try {
    up = update_add_inducing(state_, x_cand);
  } catch (const DegenerateUpdate&) {
    return std::numeric_limits<double>::infinity();
  } catch (const IllConditioned&) {
    return std::numeric_limits<double>::infinity();
  }
  const Matrix w = augmented_w(x_cand, nullptr);
  return erf_const_ - (trace_inv_product(up.state.k_chol, w) - trace_inv_product(up.state.q_chol, w));
}

double WimseEvaluator::value_and_gradient(const Vector& x, Vector& grad, WimseGradientTerms* terms) const {
  const Eigen::Index d = state_.dim();
  const Eigen::Index m = state_.m();
  const Eigen::Index n = state_.n();
  if (x.size() != d) throw InvalidArgument("wimse: dimension mismatch");
  grad = Vector::Zero(d);
  if (terms) *terms = {Vector::Zero(d), Vector::Zero(d), Vector::Zero(d)};
  UpdateResult up;
  try {
    up = update_add_inducing(state_, x);
  } catch (const DegenerateUpdate&) {
    return std::numeric_limits<double>::infinity();
  } catch (const IllConditioned&) {
    return std::numeric_limits<double>::infinity();
  }
  const InducedState& s = up.state;
  std::vector<Vector> last_factors;
  const Matrix w = augmented_w(x, &last_factors);

  const Matrix zk = chol_solve(s.k_chol, w);  // Kj^-1 W
  const Matrix zq = chol_solve(s.q_chol, w);  // Q^-1 W
  const double value = erf_const_ - (zk.trace() - zq.trace());

  const Matrix a = chol_solve(s.k_chol, Matrix(zk.transpose()));  // Kj^-1 W Kj^-1
  const Matrix b = chol_solve(s.q_chol, Matrix(zq.transpose()));  // Q^-1 W Q^-1
  Vector e_last = Vector::Zero(m + 1);
  e_last(m) = 1.0;
  const Vector c_last = chol_solve(s.k_chol, e_last) - chol_solve(s.q_chol, e_last);

  const Matrix& kn = s.k_nm;                                        // n x (m+1)
  const Matrix p = chol_solve(s.k_chol, Matrix(kn.transpose())).transpose();  // Kn Kj^-1
  const Matrix knb = kn * b;
  const Vector sdiag = knb.cwiseProduct(kn).rowwise().sum();
  const Vector dinv = s.omega.cwiseInverse();
  const double floor = s.omega_floor();

  const Vector k_m_new = kernel_vector(state_.x_bar, x, theta_);
  for (Eigen::Index k = 0; k < d; ++k) {
    Vector dk(m);
    for (Eigen::Index j = 0; j < m; ++j) dk(j) = 2.0 * (state_.x_bar(j, k) - x(k)) / theta_ * k_m_new(j);
    Vector dkn(n);
    for (Eigen::Index i = 0; i < n; ++i) dkn(i) = 2.0 * (s.x_n(i, k) - x(k)) / theta_ * kn(i, m);

    const double tr_ka = 2.0 * dk.dot(a.col(m).head(m));
    const double tr_kb = 2.0 * dk.dot(b.col(m).head(m));

    const Vector p_dk = p.leftCols(m) * dk;
    double tr_qb = tr_kb;
    for (Eigen::Index i = 0; i < n; ++i) {
      tr_qb += 2.0 * dkn(i) * dinv(i) * knb(i, m);
      if (s.omega_raw(i) > floor) {
        const double d_omega = -2.0 * dkn(i) * p(i, m) + 2.0 * p(i, m) * p_dk(i);
        tr_qb -= dinv(i) * dinv(i) * d_omega * sdiag(i);
      }
    }

    // dW is nonzero only in the last row/column.
    double tr_cdw = 0.0;
    const double lo = domain_.lower(k);
    const double hi = domain_.upper(k);
    for (Eigen::Index j = 0; j <= m; ++j) {
      double others = 1.0;
      for (Eigen::Index kk = 0; kk < d; ++kk) {
        if (kk != k) others *= last_factors[static_cast<std::size_t>(kk)](j);
      }
      const double aj = j < m ? state_.x_bar(j, k) : x(k);
      const double partial = w_factor_db(aj, x(k), x_star_(k), theta_, lo, hi) * others;
      tr_cdw += j < m ? 2.0 * c_last(j) * partial : c_last(m) * 2.0 * partial;
    }
    grad(k) = tr_ka - tr_qb - tr_cdw;
    if (terms) {
      terms->k_term(k) = tr_ka;
      terms->q_term(k) = tr_qb;
      terms->w_term(k) = tr_cdw;
    }
  }
  return value;
}

double wimse(const Vector& x_cand, const InducedState& state, const Domain& domain, const Vector& x_star) {
  return WimseEvaluator(state, domain, x_star).value(x_cand);
}

Vector wimse_grad(const Vector& x_cand, const InducedState& state, const Domain& domain, const Vector& x_star) {
  Vector grad;
  WimseEvaluator(state, domain, x_star).value_and_gradient(x_cand, grad);
  return grad;
}

double w_factor_unweighted(double a, double b, double theta, double lo, double hi) {
  const double c = 0.5 * (a + b);
  const double r = std::sqrt(2.0 / theta);
  return std::sqrt(kPi * theta / 8.0) * std::exp(-(a - b) * (a - b) / (2.0 * theta)) *
         erf_diff((hi - c) * r, (lo - c) * r);
}

GlobalImseWorkspace global_imse_workspace(const Matrix& points, double theta, double g, const Domain& domain) {
  if (points.cols() != domain.dim()) throw InvalidArgument("global_imse_workspace: dimension mismatch");
  GlobalImseWorkspace ws;
  ws.e = (1.0 + g) * domain.volume();
  const Eigen::Index m = points.rows();
  ws.w = Matrix::Ones(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j; i < m; ++i) {
      double v = 1.0;
      for (Eigen::Index k = 0; k < points.cols(); ++k) {
        v *= w_factor_unweighted(points(i, k), points(j, k), theta, domain.lower(k), domain.upper(k));
      }
      ws.w(i, j) = v;
      ws.w(j, i) = v;
    }
  }
  return ws;
}

double imse_global(const Vector& x_cand, const InducedState& state, const Domain& domain) {
  UpdateResult up;
  try {
    up = update_add_inducing(state, x_cand);
  } catch (const DegenerateUpdate&) {
    return std::numeric_limits<double>::infinity();
  }
  const GlobalImseWorkspace ws = global_imse_workspace(up.state.x_bar, state.config.theta, state.config.g, domain);
  return ws.e - (trace_inv_product(up.state.k_chol, ws.w) - trace_inv_product(up.state.q_chol, ws.w));
}

double alc_global(const Vector& x_cand, const InducedState& state, const Matrix& ref_set) {
  if (ref_set.rows() == 0) throw InvalidArgument("alc_global: empty reference set");
  if (ref_set.cols() != state.dim()) throw InvalidArgument("alc_global: dimension mismatch");
  UpdateResult up;
  try {
    up = update_add_inducing(state, x_cand);
  } catch (const DegenerateUpdate&) {
    return -std::numeric_limits<double>::infinity();
  }
  // Sum over the reference set of k^T (Kj^-1 - Q^-1) k, before and after.
  auto explained = [&ref_set](const InducedState& s) {
    const Matrix k = cross_kernel_matrix(s.x_bar, ref_set, s.config.theta);
    return lower_solve(s.k_chol, k).squaredNorm() - lower_solve(s.q_chol, k).squaredNorm();
  };
  return explained(up.state) - explained(state);
}

double lagp_alc_delta(const DenseGp& local, const Vector& x_cand, const Vector& x_star) {
  if (x_cand.size() != local.x.cols() || x_star.size() != local.x.cols()) {
    throw InvalidArgument("lagp_alc_delta: dimension mismatch");
  }
  const Vector k_cand = kernel_vector(local.x, x_cand, local.theta);
  const Vector kinv_cand = chol_solve(local.chol, k_cand);
  const double v = 1.0 + local.g - k_cand.dot(kinv_cand);
  if (!(v > 0.0)) return 0.0;
  const Vector g_vec = -kinv_cand / v;  // g_n(x_{n+1})
  const Vector k_star = kernel_vector(local.x, x_star, local.theta);
  const double k_cs = kernel(x_cand, x_star, local.theta);
  const double kg = k_star.dot(g_vec);
  return kg * kg * v + 2.0 * kg * k_cs + k_cs * k_cs / v;
}

double lagp_alc_delta(const DenseGp& local, const Neighborhood& nb, const Matrix& x_all, Eigen::Index cand,
                      const Vector& x_star) {
  if (cand < 0 || cand >= x_all.rows()) throw InvalidArgument("lagp_alc_delta: candidate index out of range");
  for (const Eigen::Index i : nb.indices) {
    if (i == cand) throw InvalidArgument("lagp_alc_delta: candidate already in neighborhood");
  }
  return lagp_alc_delta(local, Vector(x_all.row(cand).transpose()), x_star);
}

}  // namespace ligp
