#include "ligp/local_design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "ligp/linalg.hpp"
#include "ligp/optim.hpp"

namespace ligp {

namespace {

std::atomic<std::uint64_t> g_design_count{0};

Vector median_rows(const Matrix& x) {
  Vector med(x.cols());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    std::vector<double> col(x.col(k).data(), x.col(k).data() + x.rows());
    med(k) = quantile(std::move(col), 0.5);
  }
  return med;
}

// Weighted IMSE of the current inducing set (no candidate).
double current_wimse(const InducedState& state, const WimseEvaluator& ev) {
  return ev.erf_const() - trace_inv_product(state.k_chol, ev.w_star()) +
         trace_inv_product(state.q_chol, ev.w_star());
}

}  // namespace

double theta0_quantile(const Matrix& x_n) {
  const Eigen::Index n = x_n.rows();
  if (n < 2) throw InvalidArgument("theta0_quantile: need at least two points");
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d2.push_back(squared_distance(x_n.row(i), x_n.row(j)));
  if (*std::max_element(d2.begin(), d2.end()) <= 0.0) {
    throw DegenerateGeometry("theta0_quantile: all points identical");
  }
  const double q = quantile(std::move(d2), 0.1);
  if (!(q > 0.0)) throw DegenerateGeometry("theta0_quantile: 10% quantile of squared distances is zero");
  return q;
}

double theta0_gauss(const Matrix& x_n, const Vector& x_star) {
  if (x_n.rows() < 1) throw InvalidArgument("theta0_gauss: empty neighborhood");
  if (x_n.cols() != x_star.size()) throw InvalidArgument("theta0_gauss: dimension mismatch");
  const double dev = (x_n.rowwise() - x_star.transpose()).cwiseAbs().maxCoeff();
  return (dev / 3.0) * (dev / 3.0);
}

Matrix lhs(Eigen::Index count, Eigen::Index d, std::uint64_t seed) {
  if (count < 1 || d < 1) throw InvalidArgument("lhs: need count >= 1 and d >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix out(count, d);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(count));
  for (Eigen::Index k = 0; k < d; ++k) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index i = 0; i < count; ++i) {
      double jitter = u(rng);
      while (jitter <= 0.0) jitter = u(rng);
      out(i, k) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + jitter) / static_cast<double>(count);
    }
  }
  return out;
}

LocalDesign greedy_wimse_design(Eigen::Index m, const Neighborhood& nb, const Domain& domain,
                                const DesignOptions& options) {
  if (m < 1) throw InvalidArgument("greedy_wimse_design: need m >= 1");
  if (nb.size() < m) throw InvalidArgument("greedy_wimse_design: need n >= m");
  if (domain.dim() != nb.x_n.cols()) throw InvalidArgument("greedy_wimse_design: domain dimension mismatch");
  g_design_count.fetch_add(1, std::memory_order_relaxed);

  const Eigen::Index d = nb.x_n.cols();
  const Vector& x_star = nb.center;
  LocalDesign out;
  out.neighborhood = nb;
  out.theta0 = theta0_quantile(nb.x_n);
  const KernelConfig cfg = options.kernel.with_theta(out.theta0);

  const Domain box = Domain::bounding_box(nb.x_n);
  Matrix x_bar = x_star.transpose();
  InducedState state = build_state(nb.x_n, nb.y_n, x_bar, cfg);

  BoxOptions bopt;
  bopt.ftol = options.log_tolerance;
  bopt.max_iterations = options.max_iterations;

  for (Eigen::Index i = 1; i < m; ++i) {
    const WimseEvaluator ev(state, domain, x_star);
    const double before = current_wimse(state, ev);
    const ValueAndGradient fg = [&ev](const Vector& x, Vector& g) {
      const double v = ev.value_and_gradient(x, g);
      if (!std::isfinite(v)) {
        g.setZero();
        return std::numeric_limits<double>::infinity();
      }
      const double vv = std::max(v, std::numeric_limits<double>::min());
      g /= vv;
      return std::log(vv);
    };

    const Matrix starts = lhs(options.starts, d, options.seed + static_cast<std::uint64_t>(i));
    std::vector<std::pair<double, Vector>> found;
    for (Eigen::Index s = 0; s < starts.rows(); ++s) {
      Vector x0 = box.lower.array() + starts.row(s).transpose().array() * (box.upper - box.lower).array();
      const BoxResult r = minimize_box(fg, x0, box.lower, box.upper, bopt);
      if (std::isfinite(r.value)) found.emplace_back(r.value, r.x);
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    bool placed = false;
    for (const auto& [value, x] : found) {
      try {
        state = update_add_inducing(state, x).state;
      } catch (const DegenerateUpdate&) {
        continue;
      } catch (const IllConditioned&) {
        continue;
      }
      x_bar.conservativeResize(x_bar.rows() + 1, Eigen::NoChange);
      x_bar.row(x_bar.rows() - 1) = x.transpose();
      out.wimse_before.push_back(before);
      out.wimse_path.push_back(std::exp(value));
      placed = true;
      break;
    }
    if (!placed) {
      out.complete = false;
      break;
    }
  }
  out.x_bar = x_bar;
  return out;
}

LocalDesign greedy_wimse_design(Eigen::Index m, Eigen::Index n, const Vector& x_star, const Dataset& data,
                                const Domain& domain, const DesignOptions& options) {
  if (n < m) throw InvalidArgument("greedy_wimse_design: need n >= m");
  return greedy_wimse_design(m, nearest_neighbors(data, x_star, n), domain, options);
}

std::uint64_t greedy_design_count() { return g_design_count.load(std::memory_order_relaxed); }

Template build_wimse_template(Eigen::Index m, Eigen::Index n, const Dataset& data, const Domain& domain,
                              const DesignOptions& options) {
  const Vector center = median_rows(data.x);
  const LocalDesign design = greedy_wimse_design(m, n, center, data, domain, options);
  Template tpl;
  tpl.offsets = design.x_bar.rowwise() - center.transpose();
  tpl.offsets.row(0).setZero();
  tpl.theta0 = design.theta0;
  tpl.kind = "wimse";
  tpl.center = center;
  return tpl;
}

LocalDesign displace_template(const Template& tpl, const Vector& x_star, const Dataset& data, Eigen::Index n) {
  if (tpl.dim() != x_star.size()) throw InvalidArgument("displace_template: dimension mismatch");
  if (n < tpl.m()) throw InvalidArgument("displace_template: need n >= m");
  LocalDesign out;
  out.x_bar = tpl.offsets.rowwise() + x_star.transpose();
  out.neighborhood = nearest_neighbors(data, x_star, n);
  out.theta0 = tpl.theta0;
  return out;
}

Matrix chr_points(Eigen::Index m, const Matrix& x_n, const Vector& x_star, std::uint64_t seed) {
  if (m < 2) throw InvalidArgument("chr_template: need m >= 2");
  const Eigen::Index d = x_star.size();
  const Vector lo = x_n.colwise().minCoeff().transpose();
  const Vector hi = x_n.colwise().maxCoeff().transpose();
  const Matrix u = lhs(m - 1, d, seed);
  Matrix out(m, d);
  out.row(0) = x_star.transpose();
  for (Eigen::Index i = 0; i < m - 1; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      out(i + 1, k) = hi(k) > lo(k) ? lo(k) + u(i, k) * (hi(k) - lo(k)) : x_star(k);
    }
  }
  return out;
}

Matrix qnorm_points(Eigen::Index m, const Matrix& x_n, const Vector& x_star, std::uint64_t seed) {
  if (m < 2) throw InvalidArgument("qnorm_template: need m >= 2");
  const Eigen::Index d = x_star.size();
  const double sd = std::sqrt(theta0_gauss(x_n, x_star));
  if (!(sd > 0.0)) throw DegenerateGeometry("qnorm_template: neighborhood collapses onto x_star");
  const Matrix u = lhs(m - 1, d, seed);
  const boost::math::normal_distribution<double> unit;
  Matrix out(m, d);
  out.row(0) = x_star.transpose();
  for (Eigen::Index i = 0; i < m - 1; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const double p = std::clamp(u(i, k), 1e-10, 1.0 - 1e-10);
      out(i + 1, k) = x_star(k) + sd * boost::math::quantile(unit, p);
    }
  }
  return out;
}

LocalDesign chr_template(Eigen::Index m, Eigen::Index n, const Vector& x_star, const Dataset& data,
                         std::uint64_t seed) {
  if (n < m) throw InvalidArgument("chr_template: need n >= m");
  LocalDesign out;
  out.neighborhood = nearest_neighbors(data, x_star, n);
  out.x_bar = chr_points(m, out.neighborhood.x_n, x_star, seed);
  return out;
}

LocalDesign qnorm_template(Eigen::Index m, Eigen::Index n, const Vector& x_star, const Dataset& data,
                           std::uint64_t seed) {
  if (n < m) throw InvalidArgument("qnorm_template: need n >= m");
  LocalDesign out;
  out.neighborhood = nearest_neighbors(data, x_star, n);
  out.theta0 = theta0_gauss(out.neighborhood.x_n, x_star);
  out.x_bar = qnorm_points(m, out.neighborhood.x_n, x_star, seed);
  return out;
}

void save_template(const Template& tpl, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("save_template: cannot open " + path);
  os << std::setprecision(17);
  os << tpl.m() << ' ' << tpl.dim() << ' ' << tpl.theta0 << ' ' << tpl.kind << '\n';
  for (Eigen::Index i = 0; i < tpl.m(); ++i) {
    for (Eigen::Index k = 0; k < tpl.dim(); ++k) os << (k ? " " : "") << tpl.offsets(i, k);
    os << '\n';
  }
  if (tpl.center.size() == tpl.dim()) {
    os << "center";
    for (Eigen::Index k = 0; k < tpl.dim(); ++k) os << ' ' << tpl.center(k);
    os << '\n';
  }
  if (!os) throw InvalidArgument("save_template: write failed for " + path);
}

Template load_template(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("load_template: cannot open " + path);
  std::string line;
  std::size_t row = 0;
  auto next_line = [&]() {
    while (std::getline(is, line)) {
      ++row;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("template: empty file", 1, 0);
  Template tpl;
  Eigen::Index m = 0, d = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> m >> d >> tpl.theta0 >> tpl.kind) || m < 1 || d < 1) {
      throw ParseError("template: header must be 'm d theta0 kind' (line " + std::to_string(row) + ")", row, 0);
    }
  }
  tpl.offsets.resize(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!next_line()) throw ParseError("template: expected " + std::to_string(m) + " offset rows", row + 1, 0);
    std::istringstream rs(line);
    for (Eigen::Index k = 0; k < d; ++k) {
      if (!(rs >> tpl.offsets(i, k))) {
        throw ParseError("template: bad value at line " + std::to_string(row) + " column " + std::to_string(k + 1),
                         row, static_cast<std::size_t>(k + 1));
      }
    }
  }
  if (next_line()) {
    std::istringstream cs(line);
    std::string tag;
    cs >> tag;
    if (tag != "center") throw ParseError("template: unexpected content at line " + std::to_string(row), row, 0);
    tpl.center.resize(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      if (!(cs >> tpl.center(k))) throw ParseError("template: bad center value", row, static_cast<std::size_t>(k + 2));
    }
  }
  return tpl;
}

}  // namespace ligp
