#pragma once

#include <cstdint>
#include <functional>

#include "ligp/kernel.hpp"

namespace ligp {

/// Objective returning f(x) and writing its gradient into the second argument.
using ValueAndGradient = std::function<double(const Vector&, Vector&)>;

struct BoxOptions {
  int max_iterations = 200;
  int memory = 8;
  /// Stop when one iteration improves f by less than this (absolute).
  double ftol = 1e-10;
  /// Stop when the projected gradient's inf-norm falls below this.
  double pgtol = 1e-8;
};

struct BoxResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Projected limited-memory BFGS for min f(x) subject to lo <= x <= hi.
BoxResult minimize_box(const ValueAndGradient& fg, const Vector& x0, const Vector& lo, const Vector& hi,
                       const BoxOptions& options = {});

struct ScalarResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Brent's bracketing minimizer on [lo, hi]; lo == hi returns lo.
ScalarResult minimize_scalar(const std::function<double(double)>& f, double lo, double hi,
                             int max_iterations = 100, int bits = 24);

/// Number of minimize_scalar calls made by this process (the lengthscale
/// searches go through it).
std::uint64_t scalar_search_count();

}  // namespace ligp
