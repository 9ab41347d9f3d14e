#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ligp/full_gp.hpp"
#include "ligp/local_design.hpp"

namespace ligp {

enum class Method { WimseBespoke, WimseTemplate, Chr, Qnorm, LagpNn, LagpAlc };

std::string method_name(Method m);
/// Accepts ligp-wimse-bespoke, ligp-wimse-template, ligp-chr, ligp-qnorm, lagp-nn, lagp-alc.
Method parse_method(const std::string& name);
bool is_ligp(Method m);

/// Local lengthscale handling: per-site MLE, or one fixed value everywhere.
struct ThetaMode {
  bool fixed = false;
  double value = 1.0;

  static ThetaMode mle() { return {}; }
  static ThetaMode fixed_at(double v) { return {true, v}; }
  /// "mle" or "fixed:<value>".
  static ThetaMode parse(const std::string& text);
  std::string to_string() const;
};

struct PredictConfig {
  Method method = Method::Qnorm;
  Eigen::Index m = 10;
  Eigen::Index n = 100;
  ThetaMode theta;
  double g = 1e-6;
  double eps_k = 1e-6;
  double eps_q = 1e-5;
  int workers = 1;
  std::uint64_t seed = 1;
  /// LAGP-ALC: starting nearest neighbors and candidate-set size (0 means 100 n).
  Eigen::Index alc_n0 = 1;
  Eigen::Index alc_candidates = 0;
  /// Multi-start settings for the greedy wIMSE builds.
  int design_starts = 20;
  double design_tolerance = 0.01;

  void validate() const;
  KernelConfig kernel() const;
  DesignOptions design_options() const;
};

/// Seconds spent per phase at one site.
struct PhaseTimes {
  double neighborhood = 0.0;
  double design = 0.0;
  double mle = 0.0;
  double predict = 0.0;
  double total() const { return neighborhood + design + mle + predict; }
};

struct SiteResult {
  PredictiveMoments moments;
  double theta_hat = 0.0;
  double nu_hat = 0.0;
  PhaseTimes times;
  bool ok = false;
  std::string error;
  /// Training rows conditioned on (the neighborhood, or the ALC selection).
  std::vector<Eigen::Index> conditioning;
};

struct BatchResult {
  std::vector<SiteResult> sites;
  double template_seconds = 0.0;
  double loop_seconds = 0.0;
  /// Greedy wIMSE builds performed during this call (template build included).
  std::uint64_t design_builds = 0;
  std::optional<Template> tpl;

  std::size_t failures() const;
  Vector means() const;
  Vector variances() const;
};

/// Runs fn(i) for i in [0, count) on `workers` threads with static chunking.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

/// Locally induced GP prediction at every row of x_star; also dispatches the
/// two LAGP comparators. Output order matches input order. For the template
/// method a prebuilt template may be supplied; otherwise one is built here
/// before the loop.
BatchResult ligp_predict(const PredictConfig& config, const Matrix& x_star, const Dataset& data,
                         const Domain& domain, const Template* prebuilt = nullptr);

/// Dense local GP on the n nearest neighbors of each site.
BatchResult lagp_nn_predict(Eigen::Index n, const Matrix& x_star, const Dataset& data, const ThetaMode& theta,
                            double g, int workers = 1);

/// Dense local GP on a greedy ALC selection grown from n0 nearest neighbors.
BatchResult lagp_alc_predict(Eigen::Index n0, Eigen::Index n, const Matrix& x_star, const Dataset& data,
                             const ThetaMode& theta, double g, int workers = 1, Eigen::Index candidates = 0);

/// The greedy ALC selection itself (indices into data, in selection order),
/// using incremental Cholesky updates over a candidate pool of the
/// `candidates` nearest neighbors.
std::vector<Eigen::Index> lagp_alc_select(const Dataset& data, const Vector& x_star, Eigen::Index n0,
                                          Eigen::Index n, Eigen::Index candidates, double theta, double g);

/// Inputs divided columnwise by square roots of global separable lengthscales.
struct ScaledDesign {
  Matrix x_scaled;
  Vector y;
  Vector scale_lengths;
  Domain original_bounds;
  bool fallback = false;  ///< MLE failed; identity scaling used
  std::string warning;

  Matrix apply(const Matrix& x) const;
  Domain scaled_domain() const;
};

/// Separable dense GP fit by MLE on a random subset, then divides inputs by
/// sqrt(lengthscale). `bounds` is the study region in original units.
ScaledDesign prescale(const Matrix& x, const Vector& y, const Domain& bounds, Eigen::Index subset_size = 1000,
                      std::uint64_t seed = 1);

}  // namespace ligp
