#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "ligp/bench.hpp"
#include "ligp/optim.hpp"
#include "ligp/predictor.hpp"

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
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = std::sin(2.0 * x(i, 0)) + std::cos(3.0 * x.row(i).tail(x.cols() - 1).sum());
  return y;
}

struct Fixture {
  Matrix x;
  Vector y;
  Dataset data;
  Matrix x_star;
  Domain domain;
};

Fixture make_fixture(Eigen::Index n_train = 3000, Eigen::Index n_test = 12, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Matrix x = uniform_points(rng, n_train, 2);
  Vector y = smooth(x);
  Matrix xs = uniform_points(rng, n_test, 2, 0.1, 0.9);
  return Fixture{x, y, Dataset(x, y), xs, Domain::cube(2, 0.0, 1.0)};
}

PredictConfig config(Method m) {
  PredictConfig c;
  c.method = m;
  c.m = 6;
  c.n = 50;
  return c;
}

const Method kAllMethods[] = {Method::WimseBespoke, Method::WimseTemplate, Method::Chr,
                              Method::Qnorm,        Method::LagpNn,        Method::LagpAlc};

TEST(PredictConfig, Validation) {
  PredictConfig c = config(Method::Qnorm);
  EXPECT_NO_THROW(c.validate());
  c.m = 60;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = config(Method::LagpNn);
  c.m = 60;  // m is irrelevant for the dense comparators
  EXPECT_NO_THROW(c.validate());
  c.n = 1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(parse_method("ligp-bogus"), InvalidArgument);
  for (Method m : kAllMethods) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_EQ(ThetaMode::parse("fixed:0.25").value, 0.25);
  EXPECT_TRUE(ThetaMode::parse("fixed:0.25").fixed);
  EXPECT_FALSE(ThetaMode::parse("mle").fixed);
  EXPECT_THROW(ThetaMode::parse("fixed:-1"), InvalidArgument);
  EXPECT_THROW(ThetaMode::parse("mle2"), InvalidArgument);
}

TEST(LigpPredict, DeterministicAcrossRunsAndWorkers) {
  const Fixture f = make_fixture();
  for (Method m : kAllMethods) {
    PredictConfig c = config(m);
    const BatchResult a = ligp_predict(c, f.x_star, f.data, f.domain);
    const BatchResult b = ligp_predict(c, f.x_star, f.data, f.domain);
    c.workers = 3;
    const BatchResult par = ligp_predict(c, f.x_star, f.data, f.domain);
    EXPECT_EQ(a.failures(), 0u) << method_name(m);
    EXPECT_EQ(a.means(), b.means()) << method_name(m);
    EXPECT_EQ(a.variances(), b.variances()) << method_name(m);
    EXPECT_EQ(a.means(), par.means()) << method_name(m);
    EXPECT_EQ(a.variances(), par.variances()) << method_name(m);
  }
}

TEST(LigpPredict, PermutationAndSingleSiteIndependence) {
  const Fixture f = make_fixture();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(f.x_star.rows()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[2], perm[7]);
  Matrix shuffled(f.x_star.rows(), 2);
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.row(static_cast<Eigen::Index>(i)) = f.x_star.row(perm[i]);
  for (Method m : {Method::WimseBespoke, Method::Qnorm, Method::Chr, Method::LagpAlc}) {
    const PredictConfig c = config(m);
    const BatchResult a = ligp_predict(c, f.x_star, f.data, f.domain);
    const BatchResult b = ligp_predict(c, shuffled, f.data, f.domain);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      EXPECT_EQ(b.sites[i].moments.mean, a.sites[static_cast<std::size_t>(perm[i])].moments.mean) << method_name(m);
      EXPECT_EQ(b.sites[i].moments.variance, a.sites[static_cast<std::size_t>(perm[i])].moments.variance);
    }
    const BatchResult one = ligp_predict(c, f.x_star.row(4), f.data, f.domain);
    EXPECT_EQ(one.sites[0].moments.mean, a.sites[4].moments.mean) << method_name(m);
    EXPECT_EQ(one.sites[0].theta_hat, a.sites[4].theta_hat);
  }
}

TEST(LigpPredict, InterpolatesAtTrainingPoint) {
  const Fixture f = make_fixture();
  PredictConfig c = config(Method::Qnorm);
  const BatchResult r = ligp_predict(c, f.x.row(123), f.data, f.domain);
  ASSERT_TRUE(r.sites[0].ok);
  EXPECT_LT(std::abs(r.sites[0].moments.mean - f.y(123)), 10.0 * std::sqrt(c.g * r.sites[0].nu_hat));
}

TEST(LigpPredict, FixedThetaNeverOptimizes) {
  const Fixture f = make_fixture();
  for (Method m : kAllMethods) {
    PredictConfig c = config(m);
    c.theta = ThetaMode::fixed_at(0.05);
    const std::uint64_t before = scalar_search_count();
    const BatchResult r = ligp_predict(c, f.x_star, f.data, f.domain);
    EXPECT_EQ(scalar_search_count(), before) << method_name(m);
    for (const auto& s : r.sites) EXPECT_EQ(s.theta_hat, 0.05);
  }
  const std::uint64_t before = scalar_search_count();
  ligp_predict(config(Method::Qnorm), f.x_star, f.data, f.domain);
  EXPECT_EQ(scalar_search_count() - before, static_cast<std::uint64_t>(f.x_star.rows()));
}

TEST(LigpPredict, TemplateOptimizesOncePerBatch) {
  const Fixture f = make_fixture();
  const BatchResult tpl = ligp_predict(config(Method::WimseTemplate), f.x_star, f.data, f.domain);
  EXPECT_EQ(tpl.design_builds, 1u);
  ASSERT_TRUE(tpl.tpl.has_value());
  const BatchResult reuse = ligp_predict(config(Method::WimseTemplate), f.x_star, f.data, f.domain, &*tpl.tpl);
  EXPECT_EQ(reuse.design_builds, 0u);
  EXPECT_EQ(reuse.means(), tpl.means());
  const BatchResult bespoke = ligp_predict(config(Method::WimseBespoke), f.x_star, f.data, f.domain);
  EXPECT_EQ(bespoke.design_builds, static_cast<std::uint64_t>(f.x_star.rows()));
  for (Method m : {Method::Chr, Method::Qnorm}) EXPECT_EQ(ligp_predict(config(m), f.x_star, f.data, f.domain).design_builds, 0u);
}

TEST(LigpPredict, SiteFailuresAreIsolated) {
  // A site whose neighborhood collapses onto one point breaks qNorm there only.
  Matrix x(60, 2);
  std::mt19937_64 rng(2);
  x.topRows(30) = uniform_points(rng, 30, 2);
  x.bottomRows(30).setConstant(5.0);
  const Dataset data(x, smooth(x));
  Matrix xs(3, 2);
  xs << 0.5, 0.5, 5.0, 5.0, 0.3, 0.6;
  PredictConfig c = config(Method::Qnorm);
  c.n = 20;
  c.m = 4;
  const BatchResult r = ligp_predict(c, xs, data, Domain::cube(2, 0.0, 6.0));
  EXPECT_TRUE(r.sites[0].ok);
  EXPECT_FALSE(r.sites[1].ok);
  EXPECT_FALSE(r.sites[1].error.empty());
  EXPECT_TRUE(r.sites[2].ok);
  EXPECT_EQ(r.failures(), 1u);
}

TEST(LagpNn, WholeDataIsFullGp) {
  const Fixture f = make_fixture(40, 5);
  const BatchResult r = lagp_nn_predict(40, f.x_star, f.data, ThetaMode::fixed_at(0.1), 1e-6);
  const DenseGp gp = fit_dense_gp(f.x, f.y, 0.1, 1e-6);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const PredictiveMoments p = predict(gp, f.x_star.row(i).transpose());
    EXPECT_NEAR(r.sites[static_cast<std::size_t>(i)].moments.mean, p.mean, 1e-12);
    EXPECT_NEAR(r.sites[static_cast<std::size_t>(i)].moments.variance, p.variance, 1e-12);
  }
}

TEST(LagpNn, AgreesWithInducedModelOnItsNeighborhood) {
  // Sparse data and a short lengthscale keep the exact-jitter state well conditioned.
  const Fixture f = make_fixture(300, 5);
  const BatchResult r = lagp_nn_predict(30, f.x_star, f.data, ThetaMode::fixed_at(0.002), 1e-6);
  KernelConfig k;
  k.theta = 0.002;
  k.g = 1e-6;
  k.eps_k = 1e-13;
  k.eps_q = 1e-13;
  for (Eigen::Index i = 0; i < 5; ++i) {
    const Vector xs = f.x_star.row(i).transpose();
    const Neighborhood nb = nearest_neighbors(f.data, xs, 30);
    const PredictiveMoments p = predict(build_state(nb.x_n, nb.y_n, nb.x_n, k), xs);
    const auto& s = r.sites[static_cast<std::size_t>(i)].moments;
    EXPECT_NEAR(s.mean, p.mean, 1e-6 * (1.0 + std::abs(p.mean)));
    EXPECT_NEAR(s.variance, p.variance, 1e-6 * p.variance + 1e-12);
  }
}

// Greedy selection that refits the dense GP for every candidate.
std::vector<Eigen::Index> exhaustive_alc(const Matrix& x, const Vector& xs, Eigen::Index n0, Eigen::Index n,
                                         double theta, double g) {
  std::vector<double> d(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) d[static_cast<std::size_t>(i)] = (x.row(i) - xs.transpose()).squaredNorm();
  std::vector<Eigen::Index> order(d.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return d[static_cast<std::size_t>(a)] < d[static_cast<std::size_t>(b)];
  });
  std::vector<Eigen::Index> sel(order.begin(), order.begin() + n0);
  auto rows = [&](const std::vector<Eigen::Index>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    return out;
  };
  while (static_cast<Eigen::Index>(sel.size()) < n) {
    const double v0 = scaled_variance(fit_dense_gp(rows(sel), Vector::Zero(static_cast<Eigen::Index>(sel.size())), theta, g), xs);
    double best = -1.0;
    Eigen::Index best_c = -1;
    for (Eigen::Index c : order) {
      if (std::find(sel.begin(), sel.end(), c) != sel.end()) continue;
      auto trial = sel;
      trial.push_back(c);
      const double v1 =
          scaled_variance(fit_dense_gp(rows(trial), Vector::Zero(static_cast<Eigen::Index>(trial.size())), theta, g), xs);
      if (v0 - v1 > best) {
        best = v0 - v1;
        best_c = c;
      }
    }
    sel.push_back(best_c);
  }
  return sel;
}

TEST(LagpAlc, MatchesExhaustiveTwoFitGreedy) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 3; ++t) {
    const Matrix x = uniform_points(rng, 200, 2);
    const Dataset data(x, smooth(x));
    const Vector xs = uniform_points(rng, 1, 2, 0.2, 0.8).transpose();
    const auto fast = lagp_alc_select(data, xs, 1, 20, 200, 0.05, 1e-6);
    EXPECT_EQ(fast, exhaustive_alc(x, xs, 1, 20, 0.05, 1e-6));
  }
}

TEST(LagpAlc, RestrictedPoolStaysInsideNeighbors) {
  const Fixture f = make_fixture(2000, 1);
  const Vector xs = f.x_star.row(0).transpose();
  const auto sel = lagp_alc_select(f.data, xs, 1, 25, 25, 0.05, 1e-6);
  auto nn = nearest_neighbors(f.data, xs, 25).indices;
  auto sorted = sel;
  std::sort(sorted.begin(), sorted.end());
  std::sort(nn.begin(), nn.end());
  EXPECT_EQ(sorted, nn);
}

TEST(LagpAlc, PicksSatellitePointsOnSmoothData) {
  const Matrix u = lhs(5000, 8, 4);
  const Matrix nat = unit_unscale(u, borehole_ranges());
  Vector y(5000);
  for (Eigen::Index i = 0; i < 5000; ++i) y(i) = borehole(nat.row(i).transpose());
  const Dataset data(u, y);
  const Vector xs = Vector::Constant(8, 0.5);
  const auto sel = lagp_alc_select(data, xs, 1, 50, 0, 0.5, 1e-6);
  const auto nn = nearest_neighbors(data, xs, 50).indices;
  int outside = 0;
  for (Eigen::Index s : sel) outside += std::find(nn.begin(), nn.end(), s) == nn.end();
  EXPECT_GE(outside, 1);
}

TEST(Prescale, IsotropicDataGivesComparableLengths) {
  std::mt19937_64 rng(5);
  const Matrix x = uniform_points(rng, 300, 3);
  Vector y(300);
  for (Eigen::Index i = 0; i < 300; ++i) y(i) = std::sin(3.0 * x(i, 0)) + std::sin(3.0 * x(i, 1)) + std::sin(3.0 * x(i, 2));
  const ScaledDesign sd = prescale(x, y, Domain::cube(3, 0, 1), 300, 1);
  ASSERT_FALSE(sd.fallback) << sd.warning;
  EXPECT_LT(sd.scale_lengths.maxCoeff() / sd.scale_lengths.minCoeff(), 3.0);
  const Matrix expect = x.array().rowwise() / sd.scale_lengths.transpose().array().sqrt();
  EXPECT_LT((sd.x_scaled - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((sd.apply(x) - expect).cwiseAbs().maxCoeff(), 1e-14);

  const ScaledDesign again = prescale(sd.x_scaled, y, sd.scaled_domain(), 300, 1);
  ASSERT_FALSE(again.fallback);
  EXPECT_TRUE((again.scale_lengths.array() < 3.0).all() && (again.scale_lengths.array() > 1.0 / 3.0).all());

  const ScaledDesign repeat = prescale(x, y, Domain::cube(3, 0, 1), 300, 99);
  EXPECT_EQ(repeat.scale_lengths, sd.scale_lengths);
}

TEST(Prescale, FailureFallsBackToIdentity) {
  const Matrix x = Matrix::Ones(20, 2);
  const ScaledDesign sd = prescale(x, Vector::LinSpaced(20, 0, 1), Domain::cube(2, 0, 2), 20, 1);
  EXPECT_TRUE(sd.fallback);
  EXPECT_FALSE(sd.warning.empty());
  EXPECT_EQ(sd.scale_lengths, Vector::Ones(2));
  EXPECT_EQ(sd.x_scaled, x);
}

}  // namespace
}  // namespace ligp
