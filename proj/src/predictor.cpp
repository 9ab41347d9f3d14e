#include "ligp/predictor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "ligp/linalg.hpp"
#include "ligp/mle.hpp"

namespace ligp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

constexpr double kThetaRange = 100.0;

SiteResult predict_dense_site(const Matrix& x_local, const Vector& y_local, const Vector& x_star,
                              const ThetaMode& theta, double g, PhaseTimes times) {
  SiteResult out;
  out.times = times;
  auto t0 = Clock::now();
  double th = theta.value;
  if (!theta.fixed) {
    const double th0 = theta0_quantile(x_local);
    th = mle_theta_dense(x_local, y_local, th0, th0 / kThetaRange, th0 * kThetaRange, g).theta;
  }
  out.times.mle = seconds_since(t0);
  t0 = Clock::now();
  const DenseGp gp = fit_dense_gp(x_local, y_local, th, g);
  out.moments = predict(gp, x_star);
  out.theta_hat = th;
  out.nu_hat = gp.nu_hat;
  out.times.predict = seconds_since(t0);
  out.ok = true;
  return out;
}

template <class Site>
BatchResult run_sites(const Matrix& x_star, int workers, Site&& site) {
  BatchResult batch;
  batch.sites.resize(static_cast<std::size_t>(x_star.rows()));
  const auto t0 = Clock::now();
  parallel_for(batch.sites.size(), workers, [&](std::size_t i) {
    const Vector xs = x_star.row(static_cast<Eigen::Index>(i)).transpose();
    try {
      batch.sites[i] = site(xs);
    } catch (const std::exception& e) {
      batch.sites[i] = SiteResult{};
      batch.sites[i].ok = false;
      batch.sites[i].error = e.what();
      batch.sites[i].moments.mean = std::numeric_limits<double>::quiet_NaN();
      batch.sites[i].moments.variance = std::numeric_limits<double>::quiet_NaN();
    }
  });
  batch.loop_seconds = seconds_since(t0);
  return batch;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::WimseBespoke: return "ligp-wimse-bespoke";
    case Method::WimseTemplate: return "ligp-wimse-template";
    case Method::Chr: return "ligp-chr";
    case Method::Qnorm: return "ligp-qnorm";
    case Method::LagpNn: return "lagp-nn";
    case Method::LagpAlc: return "lagp-alc";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::WimseBespoke, Method::WimseTemplate, Method::Chr, Method::Qnorm, Method::LagpNn,
                   Method::LagpAlc}) {
    if (method_name(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + name + "'");
}

bool is_ligp(Method m) { return m != Method::LagpNn && m != Method::LagpAlc; }

ThetaMode ThetaMode::parse(const std::string& text) {
  if (text == "mle") return mle();
  const std::string prefix = "fixed:";
  if (text.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text.substr(prefix.size()), &used);
    } catch (const std::exception&) {
      throw InvalidArgument("theta mode: bad value in '" + text + "'");
    }
    if (used != text.size() - prefix.size() || !(v > 0.0)) {
      throw InvalidArgument("theta mode: fixed value must be a positive number");
    }
    return fixed_at(v);
  }
  throw InvalidArgument("theta mode must be 'mle' or 'fixed:<value>', got '" + text + "'");
}

std::string ThetaMode::to_string() const {
  if (!fixed) return "mle";
  char buf[64];
  std::snprintf(buf, sizeof buf, "fixed:%.17g", value);
  return buf;
}

void PredictConfig::validate() const {
  if (n < 2) throw InvalidArgument("config: n must be at least 2");
  if (is_ligp(method)) {
    if (m < 1) throw InvalidArgument("config: m must be at least 1");
    if (m > n) throw InvalidArgument("config: m must not exceed n for LIGP methods");
  }
  if (method == Method::LagpAlc && !(alc_n0 >= 1 && alc_n0 < n)) {
    throw InvalidArgument("config: LAGP-ALC needs 1 <= n0 < n");
  }
  if (theta.fixed && !(theta.value > 0.0)) throw InvalidArgument("config: fixed theta must be positive");
  if (workers < 1) throw InvalidArgument("config: workers must be at least 1");
  kernel().validate();
}

KernelConfig PredictConfig::kernel() const {
  KernelConfig k;
  k.theta = theta.fixed ? theta.value : 1.0;
  k.g = g;
  k.eps_k = eps_k;
  k.eps_q = eps_q;
  return k;
}

DesignOptions PredictConfig::design_options() const {
  DesignOptions o;
  o.kernel = kernel();
  o.seed = seed;
  o.starts = design_starts;
  o.log_tolerance = design_tolerance;
  return o;
}

std::size_t BatchResult::failures() const {
  return static_cast<std::size_t>(std::count_if(sites.begin(), sites.end(), [](const auto& s) { return !s.ok; }));
}

Vector BatchResult::means() const {
  Vector v(static_cast<Eigen::Index>(sites.size()));
  for (std::size_t i = 0; i < sites.size(); ++i) v(static_cast<Eigen::Index>(i)) = sites[i].moments.mean;
  return v;
}

Vector BatchResult::variances() const {
  Vector v(static_cast<Eigen::Index>(sites.size()));
  for (std::size_t i = 0; i < sites.size(); ++i) v(static_cast<Eigen::Index>(i)) = sites[i].moments.variance;
  return v;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), std::max<std::size_t>(count, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(w);
  const std::size_t chunk = (count + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

BatchResult ligp_predict(const PredictConfig& config, const Matrix& x_star, const Dataset& data,
                         const Domain& domain, const Template* prebuilt) {
  config.validate();
  if (x_star.cols() != data.dim()) throw InvalidArgument("ligp_predict: test inputs have the wrong dimension");
  if (config.n > data.size()) throw InvalidArgument("ligp_predict: n exceeds training size");
  if (config.method == Method::LagpNn) {
    return lagp_nn_predict(config.n, x_star, data, config.theta, config.g, config.workers);
  }
  if (config.method == Method::LagpAlc) {
    return lagp_alc_predict(config.alc_n0, config.n, x_star, data, config.theta, config.g, config.workers,
                            config.alc_candidates);
  }

  const std::uint64_t builds_before = greedy_design_count();
  const KernelConfig kcfg = config.kernel();
  const DesignOptions dopt = config.design_options();

  std::optional<Template> tpl;
  double template_seconds = 0.0;
  if (config.method == Method::WimseTemplate) {
    const auto t0 = Clock::now();
    if (prebuilt) {
      if (prebuilt->dim() != data.dim()) throw InvalidArgument("ligp_predict: template dimension mismatch");
      if (prebuilt->m() > config.n) throw InvalidArgument("ligp_predict: template has more points than n");
      tpl = *prebuilt;
    } else {
      tpl = build_wimse_template(config.m, config.n, data, domain, dopt);
    }
    template_seconds = seconds_since(t0);
  }

  auto site = [&](const Vector& xs) {
    SiteResult out;
    auto t0 = Clock::now();
    const Neighborhood nb = nearest_neighbors(data, xs, config.n);
    out.times.neighborhood = seconds_since(t0);
    out.conditioning = nb.indices;

    t0 = Clock::now();
    Matrix x_bar;
    switch (config.method) {
      case Method::WimseBespoke:
        x_bar = greedy_wimse_design(config.m, nb, domain, dopt).x_bar;
        break;
      case Method::WimseTemplate:
        x_bar = tpl->offsets.rowwise() + xs.transpose();
        break;
      case Method::Chr:
        x_bar = config.m >= 2 ? chr_points(config.m, nb.x_n, xs, config.seed) : Matrix(xs.transpose());
        break;
      case Method::Qnorm:
        x_bar = config.m >= 2 ? qnorm_points(config.m, nb.x_n, xs, config.seed) : Matrix(xs.transpose());
        break;
      default:
        throw InvalidArgument("ligp_predict: not an LIGP method");
    }
    out.times.design = seconds_since(t0);

    t0 = Clock::now();
    double theta = config.theta.value;
    if (!config.theta.fixed) {
      const double th0 = theta0_quantile(nb.x_n);
      theta = mle_theta(nb.x_n, nb.y_n, x_bar, th0, {th0 / kThetaRange, th0 * kThetaRange}, kcfg).theta;
    }
    out.times.mle = seconds_since(t0);

    t0 = Clock::now();
    const InducedState state = build_state(nb.x_n, nb.y_n, x_bar, kcfg.with_theta(theta));
    out.moments = predict(state, xs);
    out.theta_hat = theta;
    out.nu_hat = state.nu_hat;
    out.times.predict = seconds_since(t0);
    out.ok = std::isfinite(out.moments.mean) && std::isfinite(out.moments.variance);
    if (!out.ok) out.error = "non-finite prediction";
    return out;
  };

  BatchResult batch = run_sites(x_star, config.workers, site);
  batch.template_seconds = template_seconds;
  batch.tpl = std::move(tpl);
  batch.design_builds = greedy_design_count() - builds_before;
  return batch;
}

BatchResult lagp_nn_predict(Eigen::Index n, const Matrix& x_star, const Dataset& data, const ThetaMode& theta,
                            double g, int workers) {
  if (n < 1 || n > data.size()) throw InvalidArgument("lagp_nn_predict: need 1 <= n <= N");
  if (x_star.cols() != data.dim()) throw InvalidArgument("lagp_nn_predict: test inputs have the wrong dimension");
  return run_sites(x_star, workers, [&](const Vector& xs) {
    PhaseTimes times;
    const auto t0 = Clock::now();
    const Neighborhood nb = nearest_neighbors(data, xs, n);
    times.neighborhood = seconds_since(t0);
    SiteResult out = predict_dense_site(nb.x_n, nb.y_n, xs, theta, g, times);
    out.conditioning = nb.indices;
    return out;
  });
}

std::vector<Eigen::Index> lagp_alc_select(const Dataset& data, const Vector& x_star, Eigen::Index n0,
                                          Eigen::Index n, Eigen::Index candidates, double theta, double g) {
  if (!(n0 >= 1 && n0 <= n && n <= data.size())) throw InvalidArgument("lagp_alc_select: need 1 <= n0 <= n <= N");
  const Eigen::Index pool_size = std::min(data.size(), std::max(candidates > 0 ? candidates : 100 * n, n));
  const std::vector<Eigen::Index> pool = data.tree.nearest(x_star, static_cast<std::size_t>(pool_size));

  std::vector<Eigen::Index> chosen(pool.begin(), pool.begin() + n0);
  std::vector<char> used(pool.size(), 0);
  for (Eigen::Index i = 0; i < n0; ++i) used[static_cast<std::size_t>(i)] = 1;

  // Cholesky of K_j + g I for the current selection, and for every pool
  // member w_c = L^-1 k(X_j, x_c) plus u = L^-1 k(X_j, x_star), grown one
  // row at a time.
  const Eigen::Index p = pool_size;
  Matrix xs_pool(p, data.dim());
  for (Eigen::Index c = 0; c < p; ++c) xs_pool.row(c) = data.x.row(pool[static_cast<std::size_t>(c)]);
  Matrix l = Matrix::Zero(n, n);
  Matrix w = Matrix::Zero(n, p);
  Vector u = Vector::Zero(n);
  Vector k_star_pool(p);
  for (Eigen::Index c = 0; c < p; ++c) k_star_pool(c) = kernel(xs_pool.row(c), x_star, theta);

  auto append = [&](Eigen::Index j, Eigen::Index c_new) {
    // Row j of L, w and u after adding pool member c_new.
    const Vector x_new = xs_pool.row(c_new).transpose();
    const Vector l_row = w.col(c_new).head(j);
    const double diag2 = 1.0 + g - l_row.squaredNorm();
    if (!(diag2 > 0.0)) throw IllConditioned("K_n (ALC)", "nonpositive pivot while growing the selection");
    const double diag = std::sqrt(diag2);
    l.row(j).head(j) = l_row.transpose();
    l(j, j) = diag;
    for (Eigen::Index c = 0; c < p; ++c) {
      const double kc = kernel(xs_pool.row(c), x_new, theta);
      w(j, c) = (kc - l_row.dot(w.col(c).head(j))) / diag;
    }
    u(j) = (k_star_pool(c_new) - l_row.dot(u.head(j))) / diag;
  };
  for (Eigen::Index j = 0; j < n0; ++j) append(j, j);

  for (Eigen::Index j = n0; j < n; ++j) {
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index best_c = -1;
    for (Eigen::Index c = 0; c < p; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      const auto wc = w.col(c).head(j);
      const double v = 1.0 + g - wc.squaredNorm();
      if (!(v > 0.0)) continue;
      const double r = u.head(j).dot(wc) - k_star_pool(c);
      const double delta = r * r / v;
      if (delta > best) {
        best = delta;
        best_c = c;
      }
    }
    if (best_c < 0) throw DegenerateUpdate("lagp_alc_select: no admissible candidate");
    used[static_cast<std::size_t>(best_c)] = 1;
    chosen.push_back(pool[static_cast<std::size_t>(best_c)]);
    append(j, best_c);
  }
  return chosen;
}

BatchResult lagp_alc_predict(Eigen::Index n0, Eigen::Index n, const Matrix& x_star, const Dataset& data,
                             const ThetaMode& theta, double g, int workers, Eigen::Index candidates) {
  if (!(n0 >= 1 && n0 < n && n <= data.size())) throw InvalidArgument("lagp_alc_predict: need 1 <= n0 < n <= N");
  if (x_star.cols() != data.dim()) throw InvalidArgument("lagp_alc_predict: test inputs have the wrong dimension");
  return run_sites(x_star, workers, [&](const Vector& xs) {
    PhaseTimes times;
    auto t0 = Clock::now();
    const Neighborhood nn = nearest_neighbors(data, xs, n);
    const double th0 = theta.fixed ? theta.value : theta0_quantile(nn.x_n);
    times.neighborhood = seconds_since(t0);
    t0 = Clock::now();
    std::vector<Eigen::Index> sel = lagp_alc_select(data, xs, n0, n, candidates, th0, g);
    times.design = seconds_since(t0);
    const Neighborhood nb = gather(data.x, data.y, sel, xs);
    SiteResult out = predict_dense_site(nb.x_n, nb.y_n, xs, theta, g, times);
    out.conditioning = std::move(sel);
    return out;
  });
}

Matrix ScaledDesign::apply(const Matrix& x) const {
  if (x.cols() != scale_lengths.size()) throw InvalidArgument("ScaledDesign::apply: dimension mismatch");
  return x.array().rowwise() / scale_lengths.array().sqrt().transpose();
}

Domain ScaledDesign::scaled_domain() const {
  const Vector s = scale_lengths.array().sqrt();
  return Domain(original_bounds.lower.cwiseQuotient(s), original_bounds.upper.cwiseQuotient(s));
}

ScaledDesign prescale(const Matrix& x, const Vector& y, const Domain& bounds, Eigen::Index subset_size,
                      std::uint64_t seed) {
  const Eigen::Index big_n = x.rows();
  const Eigen::Index d = x.cols();
  if (y.size() != big_n) throw InvalidArgument("prescale: x and y row counts differ");
  if (subset_size < 2 || subset_size > big_n) throw InvalidArgument("prescale: need 2 <= subset_size <= N");
  if (bounds.dim() != d) throw InvalidArgument("prescale: bounds dimension mismatch");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(big_n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (subset_size < big_n) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(subset_size));
    std::sort(idx.begin(), idx.end());
  }
  Matrix xs(subset_size, d);
  Vector ys(subset_size);
  for (Eigen::Index i = 0; i < subset_size; ++i) {
    xs.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
    ys(i) = y(idx[static_cast<std::size_t>(i)]);
  }

  ScaledDesign out;
  out.y = y;
  out.original_bounds = bounds;
  try {
    // Center the response so the zero-mean model is reasonable.
    const Vector yc = ys.array() - ys.mean();
    const double q = theta0_quantile(xs);
    const SeparableFit fit = fit_separable_mle(xs, yc, Vector::Constant(d, q), 1e-6);
    if (!fit.lengthscales.allFinite() || (fit.lengthscales.array() <= 0.0).any()) {
      throw IllConditioned("separable K", "non-finite lengthscales");
    }
    out.scale_lengths = fit.lengthscales;
  } catch (const std::exception& e) {
    out.scale_lengths = Vector::Ones(d);
    out.fallback = true;
    out.warning = std::string("prescale: separable MLE failed, using identity scaling (") + e.what() + ")";
  }
  out.x_scaled = out.apply(x);
  return out;
}

}  // namespace ligp
