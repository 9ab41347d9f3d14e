#include "ligp/optim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>

#include <boost/math/tools/minima.hpp>

namespace ligp {

namespace {

Vector project(const Vector& x, const Vector& lo, const Vector& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

// Zero components pinned at a bound with the gradient pushing outward.
Eigen::Array<bool, Eigen::Dynamic, 1> free_mask(const Vector& x, const Vector& g, const Vector& lo,
                                                const Vector& hi) {
  Eigen::Array<bool, Eigen::Dynamic, 1> free(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool at_lo = x(i) <= lo(i) && g(i) > 0.0;
    const bool at_hi = x(i) >= hi(i) && g(i) < 0.0;
    free(i) = !(at_lo || at_hi) && lo(i) < hi(i);
  }
  return free;
}

}  // namespace

BoxResult minimize_box(const ValueAndGradient& fg, const Vector& x0, const Vector& lo, const Vector& hi,
                       const BoxOptions& options) {
  if (x0.size() != lo.size() || x0.size() != hi.size()) throw InvalidArgument("minimize_box: size mismatch");
  if ((lo.array() > hi.array()).any()) throw InvalidArgument("minimize_box: lo > hi");

  BoxResult res;
  Vector x = project(x0, lo, hi);
  Vector g(x.size());
  double f = fg(x, g);
  res.evaluations = 1;

  std::deque<std::pair<Vector, Vector>> pairs;  // (s, y)
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (!std::isfinite(f)) break;
    const auto free = free_mask(x, g, lo, hi);
    Vector pg = free.select(g, Vector::Zero(g.size()));
    if (pg.lpNorm<Eigen::Infinity>() < options.pgtol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion restricted to the free variables.
    Vector q = pg;
    std::vector<double> a(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
      const Vector s = free.select(pairs[i].first, Vector::Zero(x.size()));
      const Vector y = free.select(pairs[i].second, Vector::Zero(x.size()));
      const double sy = s.dot(y);
      if (sy <= 0.0) {
        a[i] = 0.0;
        continue;
      }
      a[i] = s.dot(q) / sy;
      q -= a[i] * y;
    }
    double gamma = 1.0;
    if (!pairs.empty()) {
      const Vector s = free.select(pairs.back().first, Vector::Zero(x.size()));
      const Vector y = free.select(pairs.back().second, Vector::Zero(x.size()));
      const double yy = y.squaredNorm();
      if (yy > 0.0 && s.dot(y) > 0.0) gamma = s.dot(y) / yy;
    }
    Vector r = gamma * q;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Vector s = free.select(pairs[i].first, Vector::Zero(x.size()));
      const Vector y = free.select(pairs[i].second, Vector::Zero(x.size()));
      const double sy = s.dot(y);
      if (sy <= 0.0) continue;
      const double b = y.dot(r) / sy;
      r += (a[i] - b) * s;
    }
    Vector dir = free.select(-r, Vector::Zero(x.size()));
    if (dir.dot(pg) >= 0.0) {
      dir = -pg;
      pairs.clear();
    }

    double step = 1.0;
    if (pairs.empty()) step = std::min(1.0, 1.0 / std::max(pg.norm(), 1e-300));
    // Cap the first trial so the step stays within the box width.
    const double width = (hi - lo).cwiseAbs().maxCoeff();
    if (std::isfinite(width) && width > 0.0 && step * dir.norm() > width) step = width / dir.norm();

    Vector x_new;
    Vector g_new(x.size());
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(x + step * dir, lo, hi);
      f_new = fg(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = pairs.empty();
      break;
    }

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      pairs.emplace_back(s, y);
      if (static_cast<int>(pairs.size()) > options.memory) pairs.pop_front();
    }
    const double improvement = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (improvement < options.ftol) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  res.x = x;
  res.value = f;
  return res;
}

namespace {
std::atomic<std::uint64_t> g_scalar_searches{0};
}  // namespace

std::uint64_t scalar_search_count() { return g_scalar_searches.load(std::memory_order_relaxed); }

ScalarResult minimize_scalar(const std::function<double(double)>& f, double lo, double hi, int max_iterations,
                             int bits) {
  if (!(lo <= hi)) throw InvalidArgument("minimize_scalar: lo > hi");
  g_scalar_searches.fetch_add(1, std::memory_order_relaxed);
  ScalarResult res;
  if (lo == hi) {
    res.x = lo;
    res.value = f(lo);
    res.evaluations = 1;
    res.converged = true;
    return res;
  }
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iterations);
  int count = 0;
  auto wrapped = [&](double t) {
    ++count;
    const double v = f(t);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  const auto [xmin, fmin] = boost::math::tools::brent_find_minima(wrapped, lo, hi, bits, iters);
  res.x = xmin;
  res.value = fmin;
  res.evaluations = count;
  res.converged = iters < static_cast<std::uintmax_t>(max_iterations);
  return res;
}

}  // namespace ligp
