#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ligp/criteria.hpp"

namespace ligp::validation {

/// Outcome of one oracle suite: the worst error seen across its instances.
struct SuiteResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  int instances = 0;
  int skipped = 0;
  bool passed = false;
  double seconds = 0.0;
};

/// A random local-design instance on [0, 1]^d: neighborhood, inducing set of
/// size m whose first row is x_star, and a candidate point.
struct CriteriaInstance {
  InducedState state;
  Domain domain;
  Vector x_star;
  Vector candidate;
};

CriteriaInstance random_criteria_instance(std::uint64_t seed, Eigen::Index d, Eigen::Index m, Eigen::Index n);

/// Tensor-product Gauss-Legendre integral of k(x, x_star) * v(x) over the
/// domain, where v is the scaled predictive variance of `state`.
double weighted_variance_quadrature(const InducedState& state, const Domain& domain, const Vector& x_star);

/// Same integral without the weight kernel.
double variance_quadrature(const InducedState& state, const Domain& domain);

/// Gradient under test: fills `grad` for the candidate; returns the value.
using GradientFn = std::function<double(const WimseEvaluator&, const Vector&, Vector&)>;

GradientFn analytic_gradient();

/// Closed-form wIMSE against quadrature (d in {1, 2, 3}).
SuiteResult quadrature_suite(int instances, std::uint64_t seed, double tolerance = 1e-5);

/// Analytic gradient against central differences (d in {1, 2, 4}).
SuiteResult gradient_suite(int instances, std::uint64_t seed, const GradientFn& gradient = analytic_gradient(),
                           double tolerance = 1e-4);

/// Likelihood, scale and predictive moments against the explicit n x n covariance.
SuiteResult woodbury_suite(int instances, std::uint64_t seed, double tolerance = 1e-7);

/// Sequential inducing-point addition against a from-scratch build.
SuiteResult update_suite(int instances, std::uint64_t seed, double tolerance = 1e-8);

/// Inducing set equal to the data against the dense GP.
SuiteResult reduction_suite(int instances, std::uint64_t seed, double tolerance = 1e-6);

/// All of the above at their default sizes.
std::vector<SuiteResult> run_all(std::uint64_t seed);

std::string format(const SuiteResult& r);

}  // namespace ligp::validation
