#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ligp/full_gp.hpp"
#include "ligp/induced_state.hpp"
#include "ligp/local_design.hpp"
#include "ligp/mle.hpp"

namespace ligp {
namespace {

Matrix uniform_points(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index d, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix x(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < d; ++k) x(i, k) = u(rng);
  return x;
}

Vector smooth(const Matrix& x) {
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = std::sin(3.0 * x.row(i).sum()) + x(i, 0) * x(i, 0);
  return y;
}

// Dense scaled covariance Omega + k_nm Kj^-1 k_mn of a state, built independently.
Matrix dense_scaled_cov(const Matrix& x_n, const Matrix& x_bar, const KernelConfig& c) {
  const Eigen::Index m = x_bar.rows();
  Matrix kj(m, m), knm(x_n.rows(), m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      kj(i, j) = std::exp(-(x_bar.row(i) - x_bar.row(j)).squaredNorm() / c.theta) + (i == j ? c.eps_k : 0.0);
  for (Eigen::Index i = 0; i < x_n.rows(); ++i)
    for (Eigen::Index j = 0; j < m; ++j) knm(i, j) = std::exp(-(x_n.row(i) - x_bar.row(j)).squaredNorm() / c.theta);
  const Matrix nys = knm * kj.ldlt().solve(knm.transpose());
  Matrix cov = nys;
  for (Eigen::Index i = 0; i < x_n.rows(); ++i) cov(i, i) = std::max(1.0 + c.g - nys(i, i), c.g + c.eps_k) + nys(i, i);
  return cov;
}

KernelConfig exact_config(double theta, double g = 1e-6) {
  KernelConfig c;
  c.theta = theta;
  c.g = g;
  c.eps_k = 1e-8;
  c.eps_q = 1e-8;
  return c;
}

TEST(Kernel, ZeroDistanceIsOne) {
  Vector x(3);
  x << 0.3, -1.2, 4.0;
  EXPECT_EQ(kernel(x, x, 0.7), 1.0);
}

TEST(Kernel, UnitDistance) {
  Vector a(1), b(1);
  a << 0.0;
  b << 1.0;
  EXPECT_NEAR(kernel(a, b, 1.0), 0.3678794, 1e-7);
}

TEST(Kernel, Symmetric) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const Matrix p = uniform_points(rng, 2, 4, -2.0, 2.0);
    EXPECT_EQ(kernel(p.row(0), p.row(1), 0.3), kernel(p.row(1), p.row(0), 0.3));
  }
}

TEST(Kernel, RejectsNonpositiveTheta) {
  Vector a = Vector::Zero(2);
  EXPECT_THROW(kernel(a, a, 0.0), InvalidArgument);
  EXPECT_THROW(kernel(a, a, -1.0), InvalidArgument);
  EXPECT_THROW(cross_kernel_matrix(Matrix::Zero(2, 2), Matrix::Zero(2, 3), 1.0), InvalidArgument);
}

TEST(Kernel, CrossMatrixMatchesScalar) {
  std::mt19937_64 rng(4);
  const Matrix x = uniform_points(rng, 3, 2), z = uniform_points(rng, 4, 2);
  const Matrix k = cross_kernel_matrix(x, z, 0.4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(k(i, j), kernel(x.row(i), z.row(j), 0.4));
  EXPECT_EQ(cross_kernel_matrix(x.topRows(1), x.topRows(1), 0.4)(0, 0), 1.0);
  const Matrix kx = cross_kernel_matrix(x, x, 0.4);
  EXPECT_TRUE(kx.isApprox(kx.transpose()));
  EXPECT_TRUE((kx.diagonal().array() == 1.0).all());
  EXPECT_TRUE((k.array() > 0.0).all() && (k.array() <= 1.0).all());
}

TEST(KernelConfig, Validation) {
  KernelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.eps_q = c.eps_k / 2;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = KernelConfig{};
  c.g = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(Domain(Vector::Ones(2), Vector::Zero(2)).validate(), InvalidArgument);
}

TEST(InducedState, OmegaAtFloorWhenInducingEqualsData) {
  std::mt19937_64 rng(5);
  const Matrix x = uniform_points(rng, 12, 2);
  KernelConfig c = exact_config(0.05);
  c.eps_k = 1e-10;
  c.eps_q = 1e-10;
  const InducedState s = build_state(x, smooth(x), x, c);
  for (Eigen::Index i = 0; i < s.n(); ++i) EXPECT_NEAR(s.omega(i), c.g, 1e-8);
}

TEST(InducedState, SinglePointScale) {
  Matrix x(1, 1);
  x << 0.4;
  Vector y(1);
  y << 1.0;
  KernelConfig c;
  c.g = 0.0;
  const InducedState s = build_state(x, y, x, c);
  // Sigma/nu = omega + k Kj^-1 k with omega clamped at eps_k: 1 + O(eps)
  EXPECT_NEAR(s.nu_hat, 1.0, 1e-5);
}

TEST(InducedState, NuHatMatchesDense) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 5; ++t) {
    const Matrix x = uniform_points(rng, 50, 2), xb = uniform_points(rng, 5, 2);
    const Vector y = smooth(x);
    const KernelConfig c = exact_config(0.2, 1e-4);
    const InducedState s = build_state(x, y, xb, c);
    const Matrix cov = dense_scaled_cov(x, xb, c);
    const double nu = y.dot(cov.ldlt().solve(y)) / 50.0;
    EXPECT_NEAR(s.nu_hat / nu, 1.0, 1e-8);
    EXPECT_NEAR(nu_hat(s) / nu, 1.0, 1e-8);
  }
}

TEST(InducedState, LikelihoodMatchesDenseMvn) {
  std::mt19937_64 rng(7);
  const Matrix x = uniform_points(rng, 30, 2), xb = uniform_points(rng, 4, 2);
  const Vector y = smooth(x);
  const KernelConfig c = exact_config(0.3, 1e-3);
  const InducedState s = build_state(x, y, xb, c);
  const Matrix cov = dense_scaled_cov(x, xb, c);
  Eigen::LDLT<Matrix> ldlt(cov);
  const double logdet = ldlt.vectorD().array().log().sum();
  const double dense = 30.0 * std::log(y.dot(ldlt.solve(y))) + logdet;
  EXPECT_NEAR(neg_conc_loglik(s), dense, 1e-7);

  // Doubling y moves only the first term, by n log 4.
  const InducedState s2 = build_state(x, 2.0 * y, xb, c);
  EXPECT_NEAR(neg_conc_loglik(s2) - neg_conc_loglik(s), 30.0 * std::log(4.0), 1e-9);
}

TEST(InducedState, LikelihoodReducesToFullGp) {
  std::mt19937_64 rng(8);
  const Matrix x = uniform_points(rng, 15, 2);
  const Vector y = smooth(x);
  KernelConfig c = exact_config(0.1, 1e-6);
  c.eps_k = 1e-13;
  c.eps_q = 1e-13;
  const InducedState s = build_state(x, y, x, c);
  const DenseGp gp = fit_dense_gp(x, y, c.theta, c.g);
  EXPECT_NEAR(neg_conc_loglik(s), neg_conc_loglik(gp), 1e-6 * std::abs(neg_conc_loglik(gp)) + 1e-6);
}

TEST(InducedState, NuHatZeroAndScaling) {
  std::mt19937_64 rng(9);
  const Matrix x = uniform_points(rng, 20, 2), xb = uniform_points(rng, 4, 2);
  const InducedState zero = build_state(x, Vector::Zero(20), xb, exact_config(0.3));
  EXPECT_EQ(zero.nu_hat, 0.0);
  EXPECT_TRUE(zero.zero_response);
  const Vector y = smooth(x);
  const InducedState a = build_state(x, y, xb, exact_config(0.3));
  const InducedState b = build_state(x, 3.0 * y, xb, exact_config(0.3));
  EXPECT_NEAR(b.nu_hat / a.nu_hat, 9.0, 1e-10);
}

TEST(InducedState, IllConditionedNamesMatrix) {
  Matrix x(2, 1);
  x << 0.0, 1.0;
  KernelConfig c;
  c.theta = 1e300;
  c.eps_k = 1e-300;
  c.eps_q = 1e-300;
  c.g = 0.0;
  Matrix xb(2, 1);
  xb << 0.0, 1e-200;
  try {
    build_state(x, Vector::Ones(2), xb, c);
    FAIL() << "expected IllConditioned";
  } catch (const IllConditioned& e) {
    EXPECT_FALSE(e.matrix().empty());
  }
}

TEST(Predict, FullGpReduction) {
  std::mt19937_64 rng(10);
  const Matrix x = uniform_points(rng, 25, 2);
  const Vector y = smooth(x);
  KernelConfig c = exact_config(0.1, 1e-6);
  c.eps_k = 1e-13;
  c.eps_q = 1e-13;
  const InducedState s = build_state(x, y, x, c);
  const DenseGp gp = fit_dense_gp(x, y, c.theta, c.g);
  const Matrix probes = uniform_points(rng, 20, 2);
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    const PredictiveMoments a = predict(s, probes.row(i).transpose());
    const PredictiveMoments b = predict(gp, probes.row(i).transpose());
    EXPECT_NEAR(a.mean, b.mean, 1e-6 * (1.0 + std::abs(b.mean)));
    EXPECT_NEAR(a.variance, b.variance, 1e-6 * b.variance + 1e-12);
  }
}

TEST(Predict, InterpolatesTrainingPoint) {
  std::mt19937_64 rng(11);
  const Matrix x = uniform_points(rng, 10, 1);
  const Vector y = smooth(x);
  KernelConfig c = exact_config(0.05, 1e-8);
  c.eps_k = 1e-10;
  c.eps_q = 1e-10;
  const InducedState s = build_state(x, y, x, c);
  const PredictiveMoments p = predict(s, x.row(0).transpose());
  EXPECT_NEAR(p.mean, y(0), 1e-5);
  EXPECT_LT(p.variance, s.nu_hat * 1e-5);
  EXPECT_GE(p.variance, s.nu_hat * c.g * (1.0 - 1e-6));
}

TEST(Predict, FarFieldReturnsPrior) {
  std::mt19937_64 rng(12);
  const Matrix x = uniform_points(rng, 30, 2), xb = uniform_points(rng, 5, 2);
  const KernelConfig c = exact_config(0.1, 1e-4);
  const InducedState s = build_state(x, smooth(x), xb, c);
  Vector far(2);
  far << 30.0, 30.0;
  const PredictiveMoments p = predict(s, far);
  EXPECT_NEAR(p.mean, 0.0, 1e-12);
  EXPECT_NEAR(p.variance, s.nu_hat * (1.0 + c.g), 1e-12);
}

TEST(Update, MatchesRebuild) {
  std::mt19937_64 rng(13);
  const Matrix x = uniform_points(rng, 100, 2), xb = uniform_points(rng, 10, 2);
  const KernelConfig c = exact_config(0.1, 1e-4);
  const InducedState base = build_state(x, smooth(x), xb.topRows(9), c);
  const UpdateResult up = update_add_inducing(base, xb.row(9).transpose());
  const InducedState ref = build_state(x, smooth(x), xb, c);
  auto rel = [](const auto& a, const auto& b) { return (a - b).norm() / std::max(1.0, b.norm()); };
  EXPECT_LT(rel(up.state.k_chol, ref.k_chol), 1e-8);
  EXPECT_LT(rel(up.state.k_nm, ref.k_nm), 1e-8);
  EXPECT_LT(rel(up.state.omega, ref.omega), 1e-8);
  EXPECT_LT(rel(up.state.q_chol, ref.q_chol), 1e-8);
  EXPECT_LT(rel(up.state.alpha, ref.alpha), 1e-8);
  EXPECT_NEAR(up.state.nu_hat / ref.nu_hat, 1.0, 1e-8);
  EXPECT_GT(up.workspace.rho, 0.0);
  EXPECT_GT(up.workspace.upsilon, 0.0);
}

TEST(Update, DuplicateRejected) {
  std::mt19937_64 rng(14);
  const Matrix x = uniform_points(rng, 20, 2), xb = uniform_points(rng, 3, 2);
  const InducedState s = build_state(x, smooth(x), xb, exact_config(0.2));
  EXPECT_THROW(update_add_inducing(s, xb.row(1).transpose()), DegenerateUpdate);
}

TEST(Update, OmegaNeverIncreases) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = uniform_points(rng, 40, 2), xb = uniform_points(rng, 5, 2);
    const InducedState s = build_state(x, smooth(x), xb.topRows(4), exact_config(0.15, 1e-4));
    const UpdateResult up = update_add_inducing(s, xb.row(4).transpose());
    EXPECT_TRUE((up.state.omega.array() <= s.omega.array() + 1e-12).all());
  }
}

// Adding inducing points is not guaranteed to lower the variance of the
// diagonal-corrected model (both q* and Omega move), but it always stays
// between the nugget floor and the prior 1 + g.
TEST(Update, ScaledVarianceWithinPriorBounds) {
  std::mt19937_64 rng(16);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = uniform_points(rng, 60, 2), xb = uniform_points(rng, 8, 2), probes = uniform_points(rng, 10, 2);
    const KernelConfig c = exact_config(0.1, 1e-4);
    InducedState s = build_state(x, smooth(x), xb.topRows(1), c);
    for (Eigen::Index j = 1; j < xb.rows(); ++j) {
      s = update_add_inducing(s, xb.row(j).transpose()).state;
      for (Eigen::Index p = 0; p < probes.rows(); ++p) {
        const double v = scaled_variance(s, probes.row(p).transpose());
        EXPECT_LE(v, 1.0 + c.g + 1e-12);
        EXPECT_GE(v, c.g * (1.0 - 1e-6));
      }
    }
  }
}

TEST(Mle, RecoversGeneratingLengthscale) {
  int hits = 0;
  for (int r = 0; r < 20; ++r) {
    std::mt19937_64 rng(100 + r);
    const Matrix x = uniform_points(rng, 150, 2);
    const Matrix k = cross_kernel_matrix(x, x, 0.2) + 1e-8 * Matrix::Identity(150, 150);
    const Matrix l = k.llt().matrixL();
    std::normal_distribution<double> z;
    Vector e(150);
    for (auto& v : e) v = z(rng);
    const Vector y = l * e;
    const Matrix xb = lhs(30, 2, 200 + r);
    const KernelConfig c = exact_config(1.0, 1e-6);
    const double th0 = theta0_quantile(x);
    const MleResult fit = mle_theta(x, y, xb, th0, {th0 / 100, th0 * 100}, c);
    if (fit.theta > 0.1 && fit.theta < 0.4) ++hits;
  }
  EXPECT_GE(hits, 16);
}

TEST(Mle, NeverWorseThanStartAndFixedBounds) {
  std::mt19937_64 rng(17);
  const Matrix x = uniform_points(rng, 60, 2), xb = uniform_points(rng, 6, 2);
  const Vector y = smooth(x);
  const KernelConfig c = exact_config(1.0, 1e-4);
  const MleResult fit = mle_theta(x, y, xb, 0.3, {0.003, 30.0}, c);
  EXPECT_LE(fit.objective, neg_conc_loglik(build_state(x, y, xb, c.with_theta(0.3))) + 1e-12);
  EXPECT_GT(fit.nu_hat, 0.0);
  const MleResult fixed = mle_theta(x, y, xb, 0.3, {0.3, 0.3}, c);
  EXPECT_EQ(fixed.theta, 0.3);
}

}  // namespace
}  // namespace ligp
