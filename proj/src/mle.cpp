#include "ligp/mle.hpp"

#include <cmath>
#include <limits>

#include "ligp/optim.hpp"

namespace ligp {

MleResult mle_theta(const Matrix& x_n, const Vector& y_n, const Matrix& x_bar, double theta0,
                    std::pair<double, double> bounds, const KernelConfig& config) {
  const auto [lo, hi] = bounds;
  if (!(lo > 0.0 && lo <= theta0 && theta0 <= hi)) throw InvalidArgument("mle_theta: need 0 < lo <= theta0 <= hi");

  const Matrix d_mm = squared_distance_matrix(x_bar, x_bar);
  const Matrix d_nm = squared_distance_matrix(x_n, x_bar);
  int evaluations = 0;
  auto objective = [&](double theta) {
    ++evaluations;
    try {
      return neg_conc_loglik(build_state_from_distances(x_n, y_n, x_bar, config.with_theta(theta), d_mm, d_nm));
    } catch (const IllConditioned&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  MleResult res;
  if (lo == hi) {
    const InducedState s = build_state(x_n, y_n, x_bar, config.with_theta(theta0));
    res.theta = theta0;
    res.nu_hat = s.nu_hat;
    res.objective = neg_conc_loglik(s);
    res.evaluations = 0;
    return res;
  }

  const ScalarResult sr =
      minimize_scalar([&](double t) { return objective(std::exp(t)); }, std::log(lo), std::log(hi));
  double best_theta = std::exp(sr.x);
  double best = objective(best_theta);
  const double at_start = objective(theta0);
  if (!(best <= at_start)) {
    best_theta = theta0;
    best = at_start;
  }
  const InducedState s = build_state_from_distances(x_n, y_n, x_bar, config.with_theta(best_theta), d_mm, d_nm);
  res.theta = best_theta;
  res.nu_hat = s.nu_hat;
  res.objective = best;
  res.evaluations = evaluations;
  res.converged = sr.converged && std::isfinite(best);
  return res;
}

}  // namespace ligp
