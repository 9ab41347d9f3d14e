#pragma once

#include <atomic>
#include <cstdint>
#include <string>

#include "ligp/criteria.hpp"
#include "ligp/neighborhood.hpp"

namespace ligp {

/// 0.1 quantile (type 7) of the n(n-1)/2 squared pairwise distances.
/// Throws DegenerateGeometry when every distance is zero.
double theta0_quantile(const Matrix& x_n);

/// ((1/3) max_{i,k} |x_{i,k} - x*_k|)^2; zero signals a degenerate neighborhood.
double theta0_gauss(const Matrix& x_n, const Vector& x_star);

/// Latin hypercube of `count` points in [0, 1]^d, one per stratum of width
/// 1/count in every coordinate, jittered uniformly within strata.
Matrix lhs(Eigen::Index count, Eigen::Index d, std::uint64_t seed);

struct DesignOptions {
  int starts = 20;
  /// Stop a local search when log-wIMSE improves by less than this.
  double log_tolerance = 0.01;
  int max_iterations = 100;
  KernelConfig kernel;  ///< theta is replaced by theta0_quantile of the neighborhood
  std::uint64_t seed = 1;
};

/// Inducing points for one site plus the neighborhood they were built in.
struct LocalDesign {
  Matrix x_bar;
  Neighborhood neighborhood;
  double theta0 = 0.0;
  /// Minimized wIMSE after each greedy addition (size m - 1).
  std::vector<double> wimse_path;
  /// wIMSE of the set before each addition (size m - 1).
  std::vector<double> wimse_before;
  /// False when every start of some step was degenerate and fewer than m points were placed.
  bool complete = true;
};

/// Greedy weighted-IMSE design: x_bar_1 = x_star, then each further point
/// minimizes log wIMSE over the bounding box of the neighborhood by
/// multi-start projected L-BFGS, theta held at theta0_quantile.
LocalDesign greedy_wimse_design(Eigen::Index m, Eigen::Index n, const Vector& x_star, const Dataset& data,
                                const Domain& domain, const DesignOptions& options = {});

/// Same, on an already gathered neighborhood.
LocalDesign greedy_wimse_design(Eigen::Index m, const Neighborhood& nb, const Domain& domain,
                                const DesignOptions& options = {});

/// Number of greedy design builds run by this process; lets callers assert
/// that template methods optimize once per batch.
std::uint64_t greedy_design_count();

/// Origin-centered inducing offsets built once and translated to each site.
struct Template {
  Matrix offsets;  ///< m x d, row 0 is the zero vector
  double theta0 = 0.0;
  std::string kind = "wimse";
  Vector center;   ///< build site (empty when unknown)

  Eigen::Index m() const { return offsets.rows(); }
  Eigen::Index dim() const { return offsets.cols(); }
};

/// Greedy design at the coordinatewise median of the training inputs, shifted to the origin.
Template build_wimse_template(Eigen::Index m, Eigen::Index n, const Dataset& data, const Domain& domain,
                              const DesignOptions& options = {});

/// Inducing set offsets + x_star (no clipping) and the neighborhood of x_star.
LocalDesign displace_template(const Template& tpl, const Vector& x_star, const Dataset& data, Eigen::Index n);

/// x_star followed by an (m-1)-point LHS mapped affinely onto the bounding box
/// of the neighborhood; zero-width coordinates collapse to x*_k.
LocalDesign chr_template(Eigen::Index m, Eigen::Index n, const Vector& x_star, const Dataset& data,
                         std::uint64_t seed);

/// x_star followed by an (m-1)-point LHS pushed through N(x*_k, theta0_gauss) quantiles.
LocalDesign qnorm_template(Eigen::Index m, Eigen::Index n, const Vector& x_star, const Dataset& data,
                           std::uint64_t seed);

/// Neighborhood-level forms of the two space-filling templates.
Matrix chr_points(Eigen::Index m, const Matrix& x_n, const Vector& x_star, std::uint64_t seed);
Matrix qnorm_points(Eigen::Index m, const Matrix& x_n, const Vector& x_star, std::uint64_t seed);

/// Plain-text serialization: header "m d theta0 kind", m offset rows, then an
/// optional "center ..." line.
void save_template(const Template& tpl, const std::string& path);
Template load_template(const std::string& path);

}  // namespace ligp
