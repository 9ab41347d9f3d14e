#include "ligp/full_gp.hpp"

#include <cmath>
#include <limits>

#include "ligp/linalg.hpp"
#include "ligp/optim.hpp"

namespace ligp {

DenseGp fit_dense_gp(const Matrix& x, const Vector& y, double theta, double g) {
  if (x.rows() != y.size() || x.rows() == 0) throw InvalidArgument("fit_dense_gp: size mismatch");
  if (!(theta > 0.0) || !(g >= 0.0)) throw InvalidArgument("fit_dense_gp: need theta > 0, g >= 0");
  DenseGp gp;
  gp.x = x;
  gp.y = y;
  gp.theta = theta;
  gp.g = g;
  Matrix k = cross_kernel_matrix(x, x, theta);
  k.diagonal().array() += g;
  gp.chol = cholesky_lower(k, "K_n");
  const Vector c = lower_solve(gp.chol, y);
  gp.kinv_y = lower_transpose_solve(gp.chol, c);
  gp.quad = c.squaredNorm();
  gp.nu_hat = gp.quad / static_cast<double>(gp.n());
  return gp;
}

double neg_conc_loglik(const DenseGp& gp) {
  const double logdet = 2.0 * gp.chol.diagonal().array().log().sum();
  if (!(gp.quad > 0.0)) return -std::numeric_limits<double>::infinity();
  return static_cast<double>(gp.n()) * std::log(gp.quad) + logdet;
}

double scaled_variance(const DenseGp& gp, const Vector& x_star) {
  const Vector k = kernel_vector(gp.x, x_star, gp.theta);
  const Vector t = lower_solve(gp.chol, k);
  return 1.0 + gp.g - t.squaredNorm();
}

PredictiveMoments predict(const DenseGp& gp, const Vector& x_star) {
  if (x_star.size() != gp.x.cols()) throw InvalidArgument("predict: dimension mismatch");
  const Vector k = kernel_vector(gp.x, x_star, gp.theta);
  const Vector t = lower_solve(gp.chol, k);
  return {k.dot(gp.kinv_y), gp.nu_hat * (1.0 + gp.g - t.squaredNorm())};
}

ThetaFit mle_theta_dense(const Matrix& x, const Vector& y, double theta0, double lo, double hi, double g) {
  if (!(lo > 0.0) || !(lo <= theta0) || !(theta0 <= hi)) throw InvalidArgument("mle_theta_dense: need 0 < lo <= theta0 <= hi");
  auto objective = [&](double log_theta) {
    try {
      return neg_conc_loglik(fit_dense_gp(x, y, std::exp(log_theta), g));
    } catch (const IllConditioned&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  ThetaFit fit;
  // The dense profile can carry a spurious large-theta basin once K + gI is
  // near singular, so a coarse log grid picks the bracket before Brent.
  constexpr int kGrid = 25;
  const double a = std::log(lo), b = std::log(hi);
  int best_k = 0;
  double best_grid = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kGrid && b > a; ++k) {
    const double v = objective(a + (b - a) * k / (kGrid - 1));
    if (v < best_grid) {
      best_grid = v;
      best_k = k;
    }
  }
  const double step = (b - a) / (kGrid - 1);
  const double ga = b > a ? std::max(a, a + step * (best_k - 1)) : a;
  const double gb = b > a ? std::min(b, a + step * (best_k + 1)) : b;
  const ScalarResult r = minimize_scalar(objective, ga, gb);
  double best_log = r.x;
  double best = r.value;
  const double at_start = objective(std::log(theta0));
  if (!(best <= at_start)) {
    best_log = std::log(theta0);
    best = at_start;
  }
  fit.theta = std::exp(best_log);
  fit.objective = best;
  fit.evaluations = r.evaluations + kGrid + 1;
  fit.converged = r.converged;
  fit.nu_hat = fit_dense_gp(x, y, fit.theta, g).nu_hat;
  return fit;
}

namespace {

// Twice the profiled negative log-likelihood of a separable model and its
// gradient in (log theta_1..d, log g).
double separable_objective(const Matrix& x, const Vector& y, const Vector& params, Vector& grad) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Vector theta = params.head(d).array().exp();
  const double g = std::exp(params(d));
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) {
        const double diff = x(i, c) - x(j, c);
        s += diff * diff / theta(c);
      }
      k(i, j) = std::exp(-s);
      k(j, i) = k(i, j);
    }
  }
  Matrix kg = k;
  kg.diagonal().array() += g;
  Eigen::LLT<Matrix> llt(kg);
  if (llt.info() != Eigen::Success) {
    grad.setZero();
    return std::numeric_limits<double>::infinity();
  }
  const Vector a = llt.solve(y);
  const double quad = y.dot(a);
  const double logdet = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  const double nd = static_cast<double>(n);
  const Matrix kinv = llt.solve(Matrix::Identity(n, n));

  // d/dp [n log quad + log|K|] = tr(K^-1 dK) - n (a^T dK a) / quad
  grad.resize(d + 1);
  for (Eigen::Index c = 0; c < d; ++c) {
    double tr = 0.0;
    double qa = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = x(i, c) - x(j, c);
        // d k / d log theta_c = k * diff^2 / theta_c
        const double dk = k(i, j) * diff * diff / theta(c);
        tr += kinv(i, j) * dk;
        qa += a(i) * dk * a(j);
      }
    }
    grad(c) = tr - nd * qa / quad;
  }
  grad(d) = g * (kinv.trace() - nd * a.squaredNorm() / quad);
  return nd * std::log(quad) + logdet;
}

}  // namespace

SeparableFit fit_separable_mle(const Matrix& x, const Vector& y, const Vector& theta0, double g0) {
  const Eigen::Index d = x.cols();
  if (theta0.size() != d) throw InvalidArgument("fit_separable_mle: theta0 size mismatch");
  if (x.rows() < 2 || y.size() != x.rows()) throw InvalidArgument("fit_separable_mle: need >= 2 rows");
  Vector p0(d + 1);
  p0.head(d) = theta0.array().log();
  p0(d) = std::log(g0);
  Vector lo(d + 1);
  Vector hi(d + 1);
  lo.head(d) = p0.head(d).array() - std::log(1e3);
  hi.head(d) = p0.head(d).array() + std::log(1e3);
  lo(d) = std::log(1e-8);
  hi(d) = std::log(1e-1);
  p0(d) = std::clamp(p0(d), lo(d), hi(d));

  auto fg = [&](const Vector& p, Vector& grad) { return separable_objective(x, y, p, grad); };
  BoxOptions opts;
  opts.max_iterations = 100;
  opts.ftol = 1e-6;
  opts.pgtol = 1e-5;
  const BoxResult r = minimize_box(fg, p0, lo, hi, opts);
  SeparableFit fit;
  if (!std::isfinite(r.value)) throw IllConditioned("separable K", "likelihood not finite at any iterate");
  fit.lengthscales = r.x.head(d).array().exp();
  fit.g = std::exp(r.x(d));
  fit.objective = r.value;
  fit.converged = r.converged;
  return fit;
}

}  // namespace ligp
